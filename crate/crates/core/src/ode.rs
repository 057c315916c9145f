//! Adaptive Dormand–Prince integrators for complex-valued systems.
//!
//! Two embedded pairs share one driver: the classic 5(4) pair and the
//! 8(5,3) pair of Hairer, Nørsett and Wanner. Both reuse the last stage as the
//! first of the next step, integrate in either time direction and control
//! the step with the mixed absolute/relative RMS norm.

use num_complex::Complex64;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub rtol: f64,
    pub atol: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance {
            rtol: 1e-10,
            atol: 1e-12,
        }
    }
}

impl Tolerance {
    pub fn new(rtol: f64, atol: f64) -> Result<Self> {
        if !(rtol > 0.0 && atol > 0.0 && rtol.is_finite() && atol.is_finite()) {
            return Err(Error::domain(format!(
                "tolerances must be > 0 (rtol = {rtol}, atol = {atol})"
            )));
        }
        Ok(Tolerance { rtol, atol })
    }

    /// Relative tolerance `rtol` with `atol = rtol / 100`.
    pub fn relative(rtol: f64) -> Result<Self> {
        Self::new(rtol, rtol * 1e-2)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Tolerance {
            rtol: self.rtol * factor,
            atol: self.atol * factor,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum Method {
    /// Dormand–Prince 5(4), seven stages.
    Dopri5,
    /// Dormand–Prince 8(5,3), twelve stages plus the shared last one.
    #[default]
    Dop853,
}

#[derive(Debug, Clone, Copy)]
pub struct Options {
    pub method: Method,
    pub tolerance: Tolerance,
    pub max_steps: usize,
    /// Upper bound on `|h|`; `None` leaves it to the controller.
    pub max_step: Option<f64>,
}

impl Default for Options {
    fn default() -> Self {
        Options {
            method: Method::default(),
            tolerance: Tolerance::default(),
            max_steps: 200_000_000,
            max_step: None,
        }
    }
}

const DOPRI5_C: [f64; 6] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0];
const DOPRI5_A: [[f64; 6]; 6] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
];
const DOPRI5_B: [f64; 6] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
];
// error weights; the seventh multiplies the derivative at the new point
const DOPRI5_E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

const DOP853_C: [f64; 12] = [
    0.0,
    0.05260015195876773,
    0.0789002279381516,
    0.1183503419072274,
    0.2816496580927726,
    0.3333333333333333,
    0.25,
    0.3076923076923077,
    0.6512820512820513,
    0.6,
    0.8571428571428571,
    1.0,
];
const DOP853_A: [[f64; 12]; 12] = [
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [
        0.05260015195876773,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
    ],
    [
        0.0197250569845379,
        0.0591751709536137,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
    ],
    [
        0.02958758547680685,
        0.0,
        0.08876275643042054,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
    ],
    [
        0.2413651341592667,
        0.0,
        -0.8845494793282861,
        0.924834003261792,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
    ],
    [
        0.037037037037037035,
        0.0,
        0.0,
        0.17082860872947386,
        0.12546768756682242,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
    ],
    [
        0.037109375,
        0.0,
        0.0,
        0.17025221101954405,
        0.06021653898045596,
        -0.017578125,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
    ],
    [
        0.03709200011850479,
        0.0,
        0.0,
        0.17038392571223998,
        0.10726203044637328,
        -0.015319437748624402,
        0.008273789163814023,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
    ],
    [
        0.6241109587160757,
        0.0,
        0.0,
        -3.3608926294469414,
        -0.868219346841726,
        27.59209969944671,
        20.154067550477894,
        -43.48988418106996,
        0.0,
        0.0,
        0.0,
        0.0,
    ],
    [
        0.47766253643826434,
        0.0,
        0.0,
        -2.4881146199716677,
        -0.590290826836843,
        21.230051448181193,
        15.279233632882423,
        -33.28821096898486,
        -0.020331201708508627,
        0.0,
        0.0,
        0.0,
    ],
    [
        -0.9371424300859873,
        0.0,
        0.0,
        5.186372428844064,
        1.0914373489967295,
        -8.149787010746927,
        -18.52006565999696,
        22.739487099350505,
        2.4936055526796523,
        -3.0467644718982196,
        0.0,
        0.0,
    ],
    [
        2.273310147516538,
        0.0,
        0.0,
        -10.53449546673725,
        -2.0008720582248625,
        -17.9589318631188,
        27.94888452941996,
        -2.8589982771350235,
        -8.87285693353063,
        12.360567175794303,
        0.6433927460157636,
        0.0,
    ],
];
const DOP853_B: [f64; 12] = [
    0.054293734116568765,
    0.0,
    0.0,
    0.0,
    0.0,
    4.450312892752409,
    1.8915178993145003,
    -5.801203960010585,
    0.3111643669578199,
    -0.1521609496625161,
    0.20136540080403034,
    0.04471061572777259,
];
const DOP853_E3: [f64; 12] = [
    -0.18980075407240762,
    0.0,
    0.0,
    0.0,
    0.0,
    4.450312892752409,
    1.8915178993145003,
    -5.801203960010585,
    -0.4226823213237919,
    -0.1521609496625161,
    0.20136540080403034,
    0.02265179219836082,
];
const DOP853_E5: [f64; 12] = [
    0.01312004499419488,
    0.0,
    0.0,
    0.0,
    0.0,
    -1.2251564463762044,
    -0.4957589496572502,
    1.6643771824549864,
    -0.35032884874997366,
    0.3341791187130175,
    0.08192320648511571,
    -0.022355307863886294,
];

const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 5.0;

struct Tableau {
    c: &'static [f64],
    a: Vec<&'static [f64]>,
    b: &'static [f64],
    /// Controller exponent `1 / (q + 1)`, `q` the order of the error estimate.
    exponent: f64,
}

impl Method {
    fn tableau(self) -> Tableau {
        match self {
            Method::Dopri5 => Tableau {
                c: &DOPRI5_C,
                a: DOPRI5_A.iter().map(|r| &r[..]).collect(),
                b: &DOPRI5_B,
                exponent: 0.2,
            },
            Method::Dop853 => Tableau {
                c: &DOP853_C,
                a: DOP853_A.iter().map(|r| &r[..]).collect(),
                b: &DOP853_B,
                exponent: 0.125,
            },
        }
    }

    /// Scaled error norm of a step from its stages `k` and the derivative
    /// `k_end` at the new point.
    fn error_norm(self, h: f64, k: &[Vec<Complex64>], k_end: &[Complex64], scale: &[f64]) -> f64 {
        let n = scale.len();
        let combine = |w: &[f64], i: usize| -> Complex64 {
            w.iter()
                .zip(k)
                .filter(|(w, _)| **w != 0.0)
                .map(|(w, k)| *w * k[i])
                .sum()
        };
        match self {
            Method::Dopri5 => {
                let mut acc = 0.0;
                for i in 0..n {
                    let e = combine(&DOPRI5_E[..6], i) + DOPRI5_E[6] * k_end[i];
                    acc += (e.norm() / scale[i]).powi(2);
                }
                h.abs() * (acc / n as f64).sqrt()
            }
            Method::Dop853 => {
                // 5th-order estimate damped by the 3rd-order one
                let (mut e5, mut e3) = (0.0, 0.0);
                for (i, sc) in scale.iter().enumerate() {
                    e5 += (combine(&DOP853_E5, i).norm() / sc).powi(2);
                    e3 += (combine(&DOP853_E3, i).norm() / sc).powi(2);
                }
                if e5 == 0.0 && e3 == 0.0 {
                    return 0.0;
                }
                h.abs() * e5 / ((e5 + 0.01 * e3) * n as f64).sqrt()
            }
        }
    }
}

/// Integrates `y' = f(t, y)` from `t0` to `t1`, calling `observe` after every
/// accepted step with the new time and state.
pub fn integrate<F, O>(
    mut f: F,
    t0: f64,
    t1: f64,
    y: &mut [Complex64],
    options: &Options,
    mut observe: O,
) -> Result<StepStats>
where
    F: FnMut(f64, &[Complex64], &mut [Complex64]),
    O: FnMut(f64, &[Complex64]),
{
    let n = y.len();
    let mut stats = StepStats::default();
    if t0 == t1 {
        return Ok(stats);
    }
    let method = options.method;
    let tab = method.tableau();
    let stages = tab.c.len();
    let Tolerance { rtol, atol } = options.tolerance;
    let dir = (t1 - t0).signum();
    let span = (t1 - t0).abs();
    let max_step = options.max_step.unwrap_or(span).min(span);

    let zero = Complex64::new(0.0, 0.0);
    let mut k = vec![vec![zero; n]; stages];
    let mut k_end = vec![zero; n];
    let mut tmp = vec![zero; n];
    let mut y_new = vec![zero; n];
    let mut scale = vec![0.0; n];

    let mut t = t0;
    f(t, y, &mut k[0]);
    stats.evaluations += 1;

    let mut h = initial_step(
        &mut f,
        t,
        y,
        &k[0],
        dir,
        max_step,
        options.tolerance,
        1.0 / tab.exponent,
        &mut tmp,
        &mut k_end,
    );
    stats.evaluations += 1;

    let mut last_rejected = false;
    loop {
        if stats.accepted + stats.rejected >= options.max_steps {
            return Err(Error::Integration {
                time: t,
                step: h,
                accepted: stats.accepted,
                reason: format!("exceeded {} steps", options.max_steps),
            });
        }
        let remaining = (t1 - t).abs();
        let mut last = false;
        if h.abs() >= remaining {
            h = dir * remaining;
            last = true;
        }
        if h.abs() <= 16.0 * f64::EPSILON * t.abs().max(1.0) {
            return Err(Error::Integration {
                time: t,
                step: h,
                accepted: stats.accepted,
                reason: "step size underflow".into(),
            });
        }

        for s in 1..stages {
            let row = &tab.a[s][..s];
            for i in 0..n {
                let mut acc = zero;
                for (j, a) in row.iter().enumerate() {
                    if *a != 0.0 {
                        acc += *a * k[j][i];
                    }
                }
                tmp[i] = y[i] + h * acc;
            }
            f(t + tab.c[s] * h, &tmp, &mut k[s]);
        }
        for i in 0..n {
            let mut acc = zero;
            for (j, b) in tab.b.iter().enumerate() {
                if *b != 0.0 {
                    acc += *b * k[j][i];
                }
            }
            y_new[i] = y[i] + h * acc;
        }
        let t_new = if last { t1 } else { t + h };
        f(t_new, &y_new, &mut k_end);
        stats.evaluations += stages;

        for i in 0..n {
            scale[i] = atol + rtol * y[i].norm().max(y_new[i].norm());
        }
        let err = method.error_norm(h, &k, &k_end, &scale);
        if !err.is_finite() {
            return Err(Error::Integration {
                time: t,
                step: h,
                accepted: stats.accepted,
                reason: "non-finite error estimate".into(),
            });
        }

        if err <= 1.0 {
            stats.accepted += 1;
            t = t_new;
            y.copy_from_slice(&y_new);
            std::mem::swap(&mut k[0], &mut k_end);
            observe(t, y);
            if last {
                return Ok(stats);
            }
            let fac = (SAFETY * err.max(1e-10).powf(-tab.exponent)).clamp(FAC_MIN, FAC_MAX);
            let fac = if last_rejected { fac.min(1.0) } else { fac };
            h = dir * (h.abs() * fac).min(max_step);
            last_rejected = false;
        } else {
            stats.rejected += 1;
            h *= (SAFETY * err.powf(-tab.exponent)).max(FAC_MIN);
            last_rejected = true;
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn initial_step<F>(
    f: &mut F,
    t: f64,
    y: &[Complex64],
    f0: &[Complex64],
    dir: f64,
    max_step: f64,
    tol: Tolerance,
    order: f64,
    y1: &mut [Complex64],
    f1: &mut [Complex64],
) -> f64
where
    F: FnMut(f64, &[Complex64], &mut [Complex64]),
{
    let n = y.len() as f64;
    let sc: Vec<f64> = y.iter().map(|c| tol.atol + tol.rtol * c.norm()).collect();
    let rms = |v: &[Complex64]| -> f64 {
        (v.iter()
            .zip(&sc)
            .map(|(c, s)| (c.norm() / s).powi(2))
            .sum::<f64>()
            / n)
            .sqrt()
    };
    let d0 = rms(y);
    let d1 = rms(f0);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        0.01 * d0 / d1
    };
    let h0 = h0.min(max_step);
    for i in 0..y.len() {
        y1[i] = y[i] + dir * h0 * f0[i];
    }
    f(t + dir * h0, y1, f1);
    let diff: Vec<Complex64> = f1.iter().zip(f0).map(|(a, b)| (a - b) / h0).collect();
    let d2 = rms(&diff);
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(1.0 / order)
    };
    dir * (100.0 * h0).min(h1).min(max_step)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay() {
        let mut y = vec![Complex64::new(1.0, 0.0)];
        let stats = integrate(
            |_, y, dy| dy[0] = -y[0],
            0.0,
            3.0,
            &mut y,
            &Options::default(),
            |_, _| {},
        )
        .unwrap();
        assert!((y[0].re - (-3.0f64).exp()).abs() < 1e-10);
        assert!(stats.accepted > 0);
    }

    #[test]
    fn harmonic_phase_both_directions() {
        // i y' = w y  =>  y(t) = exp(-i w t)
        let w = 7.3;
        let opts = Options::default();
        let mut y = vec![Complex64::new(1.0, 0.0)];
        integrate(
            |_, y, dy| dy[0] = Complex64::new(0.0, -w) * y[0],
            0.0,
            10.0,
            &mut y,
            &opts,
            |_, _| {},
        )
        .unwrap();
        let expect = Complex64::from_polar(1.0, -w * 10.0);
        assert!((y[0] - expect).norm() < 1e-8, "{}", (y[0] - expect).norm());
        integrate(
            |_, y, dy| dy[0] = Complex64::new(0.0, -w) * y[0],
            10.0,
            0.0,
            &mut y,
            &opts,
            |_, _| {},
        )
        .unwrap();
        assert!((y[0] - Complex64::new(1.0, 0.0)).norm() < 1e-8);
    }

    #[test]
    fn observer_sees_every_step_and_final_time() {
        let mut times = Vec::new();
        let mut y = vec![Complex64::new(1.0, 0.0)];
        let stats = integrate(
            |_, y, dy| dy[0] = -y[0],
            0.0,
            1.0,
            &mut y,
            &Options::default(),
            |t, _| times.push(t),
        )
        .unwrap();
        assert_eq!(times.len(), stats.accepted);
        assert_eq!(*times.last().unwrap(), 1.0);
        assert!(times.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn step_limit_reports_diagnostics() {
        let opts = Options {
            max_steps: 5,
            ..Options::default()
        };
        let mut y = vec![Complex64::new(1.0, 0.0)];
        let err = integrate(
            |_, y, dy| dy[0] = Complex64::new(0.0, -50.0) * y[0],
            0.0,
            100.0,
            &mut y,
            &opts,
            |_, _| {},
        )
        .unwrap_err();
        assert!(matches!(err, Error::Integration { .. }), "{err}");
    }

    #[test]
    fn blow_up_is_an_error() {
        let mut y = vec![Complex64::new(1.0, 0.0)];
        let res = integrate(
            |_, y, dy| dy[0] = y[0] * y[0],
            0.0,
            2.0,
            &mut y,
            &Options::default(),
            |_, _| {},
        );
        assert!(matches!(res, Err(Error::Integration { .. })));
    }

    #[test]
    fn both_methods_reach_tolerance() {
        // y'' = -y as a complex pair, against cos/sin over several periods
        for method in [Method::Dopri5, Method::Dop853] {
            let opts = Options {
                method,
                ..Options::default()
            };
            let mut y = vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)];
            let stats = integrate(
                |_, y, dy| {
                    dy[0] = y[1];
                    dy[1] = -y[0];
                },
                0.0,
                50.0,
                &mut y,
                &opts,
                |_, _| {},
            )
            .unwrap();
            assert!((y[0].re - 50f64.cos()).abs() < 1e-8, "{method:?}");
            assert!((y[1].re + 50f64.sin()).abs() < 1e-8, "{method:?}");
            assert!(stats.rejected < stats.accepted);
        }
    }

    #[test]
    fn rejects_bad_tolerance() {
        assert!(Tolerance::new(0.0, 1e-12).is_err());
        assert!(Tolerance::new(1e-8, -1.0).is_err());
        assert_eq!(Tolerance::relative(1e-8).unwrap().atol, 1e-10);
    }
}
