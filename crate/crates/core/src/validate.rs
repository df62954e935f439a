//! Cross-model oracle checks run by `boost-ipi validate`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::controller::{ControllerState, IpiConfig};
use crate::error::Result;
use crate::plant::{ccm_static_gain, dcm_static_output, switched_period, BoostParams, PlantState};
use crate::sim::{rk4_step, run_open_loop};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidateOptions {
    /// Multiplies alpha on the oracle side of the controller check; anything
    /// other than 1 is a deliberate fault used as a negative control.
    pub oracle_alpha_scale: f64,
    pub seed: u64,
}

impl Default for ValidateOptions {
    fn default() -> Self {
        Self {
            oracle_alpha_scale: 1.0,
            seed: 0x1b0_05e,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

type Check = fn(&ValidateOptions) -> Result<(bool, String)>;

pub fn run_all(options: &ValidateOptions) -> Vec<CheckResult> {
    let checks: [(&'static str, Check); 5] = [
        ("ccm_equilibrium", ccm_equilibrium),
        ("dcm_equilibrium", dcm_equilibrium),
        ("averaged_vs_switched", averaged_vs_switched),
        ("rk4_order", rk4_order),
        ("controller_law_oracle", controller_law_oracle),
    ];
    checks
        .into_iter()
        .map(|(name, check)| match check(options) {
            Ok((passed, detail)) => CheckResult {
                name,
                passed,
                detail,
            },
            Err(err) => CheckResult {
                name,
                passed: false,
                detail: format!("error: {err}"),
            },
        })
        .collect()
}

fn table_params(r: f64) -> BoostParams {
    BoostParams {
        resistance: r,
        ..BoostParams::default()
    }
}

fn ccm_equilibrium(_: &ValidateOptions) -> Result<(bool, String)> {
    let p = table_params(50.0);
    let target = p.input_voltage * ccm_static_gain(0.5)?;
    let rows = run_open_loop(&p, 0.5, 0.1, PlantState::new(0.0, p.input_voltage), 20)?;
    let v = rows.last().map_or(f64::NAN, |r| r.v_out);
    let rel = (v - target).abs() / target;
    Ok((
        rel < 0.01,
        format!("v_C = {v:.6} V, static gain gives {target} V, rel err {rel:.2e}"),
    ))
}

fn dcm_equilibrium(_: &ValidateOptions) -> Result<(bool, String)> {
    let p = table_params(2000.0);
    let op = dcm_static_output(0.2, &p)?;
    let rows = run_open_loop(&p, 0.2, 0.2, PlantState::new(0.0, p.input_voltage), 20)?;
    let v = rows.last().map_or(f64::NAN, |r| r.v_out);
    let rel = (v - op.voltage).abs() / op.voltage;
    Ok((
        op.valid && rel < 0.01,
        format!(
            "v_C = {v:.6} V, quadratic gives {:.6} V, rel err {rel:.2e}",
            op.voltage
        ),
    ))
}

/// Worst relative gap between the period-averaged switched trajectory and
/// the averaged model after `settle` seconds.
pub fn averaged_switched_gap(
    params: &BoostParams,
    d1: f64,
    t_end: f64,
    settle: f64,
) -> Result<f64> {
    let x0 = PlantState::new(0.0, params.input_voltage);
    let averaged = run_open_loop(params, d1, t_end, x0, 20)?;
    let mut x = x0;
    let mut worst: f64 = 0.0;
    for pair in averaged.windows(2) {
        let period = switched_period(&x, params, d1, 200)?;
        x = period.end;
        if pair[0].t >= settle {
            let model = 0.5 * (pair[0].v_out + pair[1].v_out);
            worst = worst.max((period.mean.v_c - model).abs() / model.abs());
        }
    }
    Ok(worst)
}

fn averaged_vs_switched(_: &ValidateOptions) -> Result<(bool, String)> {
    let gap = averaged_switched_gap(&table_params(50.0), 0.5, 0.05, 0.01)?;
    Ok((gap <= 0.02, format!("max rel gap after 10 ms: {gap:.3e}")))
}

/// Least-squares slope of log(error) against log(step) for the averaged
/// model, errors taken against a much finer reference solution.
pub fn rk4_observed_order(
    params: &BoostParams,
    d1: f64,
    x0: PlantState,
    t_end: f64,
    steps: &[usize],
) -> Result<f64> {
    let solve = |n: usize| -> Result<PlantState> {
        let h = t_end / n as f64;
        let mut x = x0;
        for k in 0..n {
            x = rk4_step(
                |s: &PlantState, _| {
                    let d = crate::plant::averaged_rhs(s, d1, params);
                    PlantState::new(d.di_l, d.dv_c)
                },
                x,
                k as f64 * h,
                h,
            )?;
        }
        Ok(x)
    };
    let finest = steps.iter().copied().max().unwrap_or(1);
    let reference = solve(finest * 16)?;
    let mut points = Vec::with_capacity(steps.len());
    for &n in steps {
        let x = solve(n)?;
        let err = (x.v_c - reference.v_c).abs() + (x.i_l - reference.i_l).abs();
        points.push(((t_end / n as f64).ln(), err.ln()));
    }
    let m = points.len() as f64;
    let (sx, sy) = points
        .iter()
        .fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
    let (mx, my) = (sx / m, sy / m);
    let (num, den) = points.iter().fold((0.0, 0.0), |(n, d), (x, y)| {
        (n + (x - mx) * (y - my), d + (x - mx).powi(2))
    });
    Ok(num / den)
}

fn rk4_order(_: &ValidateOptions) -> Result<(bool, String)> {
    let order = rk4_observed_order(
        &table_params(50.0),
        0.5,
        PlantState::new(0.5, 20.0),
        0.005,
        &[10, 20, 40, 80],
    )?;
    Ok((order >= 3.5, format!("observed order {order:.3}")))
}

fn controller_law_oracle(options: &ValidateOptions) -> Result<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let cfg = IpiConfig {
            alpha: rng.random_range(1.0..100.0),
            kp: rng.random_range(0.0..5.0),
            ki: rng.random_range(0.0..50.0),
            tc: 1e-4,
            u_min: 0.0,
            u_max: 1.0,
            filter_window: 0,
        };
        let level: f64 = rng.random_range(0.0..48.0);
        let mut jitter = || level + rng.random_range(-0.05..0.05);
        let y = [jitter(), jitter(), jitter()];
        let r = [jitter(), jitter(), jitter()];
        let integral = rng.random_range(-1e-3..1e-3);
        let u_prev = rng.random_range(0.0..1.0);
        // y[0], r[0] are the new samples; older history sits behind them
        let mut state = ControllerState::from_history(
            &cfg,
            [y[1], y[2], 0.0],
            [r[1], r[2], 0.0],
            integral,
            u_prev,
        )?;
        let u = state.step_detailed(&cfg, y[0], r[0])?.unclamped;

        let alpha = cfg.alpha * options.oracle_alpha_scale;
        let e = r[0] - y[0];
        let expected = u_prev
            - ((y[0] - 2.0 * y[1] + y[2]) - (r[0] - 2.0 * r[1] + r[2])) / (alpha * cfg.tc * cfg.tc)
            + cfg.kp * e
            + cfg.ki * (integral + e * cfg.tc);
        worst = worst.max((u - expected).abs() / expected.abs().max(f64::MIN_POSITIVE));
    }
    Ok((
        worst <= 1e-12,
        format!("1000 cases, max rel err {worst:.2e}"),
    ))
}
