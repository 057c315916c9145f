//! Flat `key = value` parameter files.
//!
//! ```text
//! # deep-regime oracle preset, rates in units of g0
//! g0 = 1
//! omega = 1 g0
//! Delta = 15 g0
//! delta = 8 g0
//! ```
//!
//! Values are SI numbers (rad/s, m) unless followed by a unit suffix:
//! `Hz`, `kHz`, `MHz`, `GHz` (cyclic, converted to rad/s), `rad/s`, `m`,
//! `mm`, `um`, `nm`, or the dimensionless units `g0` (rates) and `w`
//! (lengths). Keys are case-sensitive: `delta` is the cavity detuning and
//! `Delta` the laser detuning.

use std::f64::consts::TAU;
use std::path::Path;

use crate::error::{Error, Result};
use crate::units::{PhysicalParams, DEFAULT_REGIME_THRESHOLD};

pub const KEYS: [&str; 8] = [
    "g0",
    "w",
    "omega",
    "delta",
    "Delta",
    "kappa",
    "gamma",
    "regime_threshold",
];

#[derive(Debug, Clone, Copy, PartialEq)]
enum Unit {
    Si(f64),
    RateG0,
    LengthW,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Quantity {
    value: f64,
    unit: Unit,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamFile {
    entries: Vec<(String, Quantity)>,
}

fn parse_unit(key: &str, suffix: &str) -> Result<Unit> {
    let is_length = key == "w";
    let unit = match suffix {
        "" | "rad/s" if !is_length => Unit::Si(1.0),
        "" | "m" if is_length => Unit::Si(1.0),
        "Hz" if !is_length => Unit::Si(TAU),
        "kHz" if !is_length => Unit::Si(TAU * 1e3),
        "MHz" if !is_length => Unit::Si(TAU * 1e6),
        "GHz" if !is_length => Unit::Si(TAU * 1e9),
        "mm" if is_length => Unit::Si(1e-3),
        "um" if is_length => Unit::Si(1e-6),
        "nm" if is_length => Unit::Si(1e-9),
        "g0" if !is_length && key != "g0" => Unit::RateG0,
        "w" if is_length => Unit::LengthW,
        _ => {
            return Err(Error::Config(format!(
                "unit `{suffix}` is not valid for key `{key}`"
            )))
        }
    };
    Ok(unit)
}

impl ParamFile {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries: Vec<(String, Quantity)> = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, rest) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected `key = value`", lineno + 1))
            })?;
            let key = key.trim();
            if !KEYS.contains(&key) {
                return Err(Error::Config(format!(
                    "line {}: unknown key `{key}`",
                    lineno + 1
                )));
            }
            if entries.iter().any(|(k, _)| k == key) {
                return Err(Error::Config(format!(
                    "line {}: duplicate key `{key}`",
                    lineno + 1
                )));
            }
            let mut parts = rest.split_whitespace();
            let number = parts.next().ok_or_else(|| {
                Error::Config(format!("line {}: missing value for `{key}`", lineno + 1))
            })?;
            let value: f64 = number.parse().map_err(|_| {
                Error::Config(format!("line {}: `{number}` is not a number", lineno + 1))
            })?;
            let suffix = parts.next().unwrap_or("");
            if parts.next().is_some() {
                return Err(Error::Config(format!(
                    "line {}: trailing input after value",
                    lineno + 1
                )));
            }
            let unit = if key == "regime_threshold" {
                if !suffix.is_empty() {
                    return Err(Error::Config("regime_threshold is dimensionless".into()));
                }
                Unit::Si(1.0)
            } else {
                parse_unit(key, suffix)?
            };
            entries.push((key.to_string(), Quantity { value, unit }));
        }
        Ok(ParamFile { entries })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    fn get(&self, key: &str) -> Option<Quantity> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, q)| *q)
    }

    pub fn contains(&self, key: &str) -> bool {
        self.get(key).is_some()
    }

    /// Resolves the file against `base`; keys absent from the file keep
    /// their value in `base`.
    pub fn params(&self, base: &PhysicalParams) -> Result<PhysicalParams> {
        let g0 = match self.get("g0") {
            Some(q) => match q.unit {
                Unit::Si(f) => q.value * f,
                _ => unreachable!("g0 cannot be given in units of itself"),
            },
            None => base.g0,
        };
        let w = match self.get("w") {
            Some(q) => match q.unit {
                Unit::Si(f) => q.value * f,
                Unit::LengthW => q.value * base.w,
                Unit::RateG0 => unreachable!(),
            },
            None => base.w,
        };
        // rates expressed in g0 follow the resolved g0, not the base one
        let rate = |key: &str, fallback: f64| -> f64 {
            match self.get(key) {
                Some(Quantity {
                    value,
                    unit: Unit::Si(f),
                }) => value * f,
                Some(Quantity {
                    value,
                    unit: Unit::RateG0,
                }) => value * g0,
                Some(_) => unreachable!(),
                None => fallback,
            }
        };
        let mut p = PhysicalParams {
            g0,
            w,
            omega: rate("omega", base.omega),
            delta: rate("delta", base.delta),
            big_delta: rate("Delta", base.big_delta),
            kappa: base.kappa,
            gamma: base.gamma,
        };
        if self.contains("kappa") {
            p.kappa = Some(rate("kappa", 0.0));
        }
        if self.contains("gamma") {
            p.gamma = Some(rate("gamma", 0.0));
        }
        p.validate()
            .map_err(|e| Error::Config(format!("parameter file: {e}")))?;
        Ok(p)
    }

    pub fn regime_threshold(&self) -> f64 {
        self.get("regime_threshold")
            .map(|q| q.value)
            .unwrap_or(DEFAULT_REGIME_THRESHOLD)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn base() -> PhysicalParams {
        PhysicalParams::dimensionless(1.0, 8.0, 15.0).unwrap()
    }

    #[test]
    fn parses_dimensionless_file() {
        let f = ParamFile::parse(
            "# preset\n g0 = 1\nomega = 2 g0\nDelta = 30 g0  # laser\ndelta=-8\nregime_threshold = 5\n",
        )
        .unwrap();
        let p = f.params(&base()).unwrap();
        assert_eq!(
            (p.g0, p.omega, p.big_delta, p.delta),
            (1.0, 2.0, 30.0, -8.0)
        );
        assert_eq!(f.regime_threshold(), 5.0);
    }

    #[test]
    fn converts_cyclic_frequencies_and_lengths() {
        let f = ParamFile::parse(
            "g0 = 10 MHz\nkappa = 0.4 MHz\ngamma = 2.6 MHz\nw = 20 um\nomega = 0.5 g0",
        )
        .unwrap();
        let p = f.params(&base()).unwrap();
        assert_relative_eq!(p.g0, TAU * 10e6, max_relative = 1e-15);
        assert_relative_eq!(p.omega, TAU * 5e6, max_relative = 1e-15);
        assert_relative_eq!(p.kappa.unwrap(), TAU * 0.4e6, max_relative = 1e-15);
        assert_relative_eq!(p.w, 20e-6, max_relative = 1e-15);
        // missing keys come from the base
        assert_eq!(p.delta, 8.0);
        assert_eq!(f.regime_threshold(), DEFAULT_REGIME_THRESHOLD);
    }

    #[test]
    fn rejects_malformed_input() {
        for bad in [
            "g0 1",
            "foo = 1",
            "g0 = abc",
            "g0 = 1 g0",
            "w = 1 MHz",
            "omega = 1 um",
            "g0 = 1\ng0 = 2",
            "g0 = 1 MHz extra",
            "regime_threshold = 10 g0",
            "delta =",
        ] {
            assert!(
                matches!(ParamFile::parse(bad), Err(Error::Config(_))),
                "accepted `{bad}`"
            );
        }
    }

    #[test]
    fn invalid_values_surface_as_config_errors() {
        let f = ParamFile::parse("omega = 0").unwrap();
        assert!(matches!(f.params(&base()), Err(Error::Config(_))));
    }
}
