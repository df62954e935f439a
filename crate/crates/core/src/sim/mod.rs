//! Fixed-step simulation of the sampled-data loop.
//!
//! Each control period the controller samples `v_C`, computes a duty and
//! holds it while the averaged plant is integrated over the period with
//! `substeps_per_period` RK4 steps. Load events take effect at the first
//! period boundary at or after their time stamp.

mod metrics;
mod reference;
mod rk4;

pub use metrics::{metrics, EventDeviation, Metrics};
pub use reference::{reference_at, ReferenceSpec};
pub use rk4::{rk4_step, OdeState};

use crate::controller::{ControllerState, IpiConfig};
use crate::error::{ensure_finite, Error, Result};
use crate::plant::{averaged_rhs, check_duty, BoostParams, ConductionMode, PlantState};

/// Relative tolerance for `tc == 1/fc` and for event-time comparisons.
const TIME_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoadEvent {
    pub time: f64,
    pub new_r: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub plant: BoostParams,
    pub controller: IpiConfig,
    pub reference: ReferenceSpec,
    /// Sorted by time, unique times.
    pub events: Vec<LoadEvent>,
    pub t_end: f64,
    pub x0: PlantState,
    pub substeps_per_period: usize,
}

impl Default for Scenario {
    fn default() -> Self {
        let plant = BoostParams::default();
        Self {
            plant,
            controller: IpiConfig {
                tc: plant.period(),
                ..IpiConfig::default()
            },
            reference: ReferenceSpec::Constant { level: 24.0 },
            events: Vec::new(),
            t_end: 0.1,
            x0: PlantState::new(0.0, plant.input_voltage),
            substeps_per_period: 20,
        }
    }
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        self.plant.validate()?;
        self.controller.validate()?;
        self.reference.validate()?;
        ensure_finite(self.t_end, "t_end")?;
        if self.t_end < 0.0 {
            return Err(Error::invalid("t_end must not be negative"));
        }
        if !self.x0.is_finite() {
            return Err(Error::NonFinite("initial state"));
        }
        if self.x0.i_l < 0.0 {
            return Err(Error::invalid(
                "initial inductor current must not be negative",
            ));
        }
        if self.substeps_per_period < 2 {
            return Err(Error::invalid("substeps_per_period must be at least 2"));
        }
        let ts = self.plant.period();
        if (self.controller.tc - ts).abs() > TIME_TOLERANCE * ts {
            return Err(Error::invalid(format!(
                "tc = {} does not match the switching period 1/fc = {ts}",
                self.controller.tc
            )));
        }
        let mut previous: Option<f64> = None;
        for event in &self.events {
            ensure_finite(event.time, "event time")?;
            ensure_finite(event.new_r, "event load")?;
            if event.time < 0.0 {
                return Err(Error::invalid("event times must not be negative"));
            }
            if event.new_r <= 0.0 {
                return Err(Error::invalid("event loads must be positive"));
            }
            if previous.is_some_and(|p| event.time <= p) {
                return Err(Error::invalid(
                    "events must be sorted by strictly increasing time",
                ));
            }
            previous = Some(event.time);
        }
        Ok(())
    }

    /// Number of control periods, `ceil(t_end / tc)`.
    pub fn periods(&self) -> usize {
        periods(self.t_end, self.controller.tc)
    }
}

fn periods(t_end: f64, tc: f64) -> usize {
    let ratio = t_end / tc;
    (ratio - TIME_TOLERANCE * ratio.max(1.0)).ceil().max(0.0) as usize
}

/// One recorded sample of the loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeSeriesRecord {
    pub t: f64,
    pub v_ref: f64,
    pub v_out: f64,
    pub i_l: f64,
    /// Duty applied over the period ending at `t` (the initial duty for the first row).
    pub duty: f64,
    pub mode: ConductionMode,
    /// Load resistance in effect over that period.
    pub r: f64,
}

/// Step-by-step closed loop, exposing the controller between periods.
#[derive(Debug, Clone)]
pub struct ClosedLoop {
    scenario: Scenario,
    plant: BoostParams,
    state: PlantState,
    controller: ControllerState,
    period: usize,
    periods: usize,
    next_event: usize,
}

impl ClosedLoop {
    pub fn new(scenario: &Scenario) -> Result<Self> {
        scenario.validate()?;
        let cfg = &scenario.controller;
        let y0 = scenario.x0.v_c;
        let yref0 = reference_at(&scenario.reference, 0.0);
        let mut controller = ControllerState::new(cfg, y0, yref0, cfg.u_min)?;
        // the filter starts from the initial measurement
        controller.filter(cfg, y0)?;
        let mut lp = Self {
            scenario: scenario.clone(),
            plant: scenario.plant,
            state: scenario.x0,
            controller,
            period: 0,
            periods: scenario.periods(),
            next_event: 0,
        };
        lp.apply_events(0.0);
        Ok(lp)
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn controller(&self) -> &ControllerState {
        &self.controller
    }

    pub fn plant_state(&self) -> PlantState {
        self.state
    }

    pub fn load(&self) -> f64 {
        self.plant.resistance
    }

    pub fn is_finished(&self) -> bool {
        self.period >= self.periods
    }

    pub fn initial_record(&self) -> TimeSeriesRecord {
        let duty = self.scenario.controller.u_min;
        TimeSeriesRecord {
            t: 0.0,
            v_ref: reference_at(&self.scenario.reference, 0.0),
            v_out: self.scenario.x0.v_c,
            i_l: self.scenario.x0.i_l,
            duty,
            mode: averaged_rhs(&self.scenario.x0, duty, &self.plant).mode,
            r: self.plant.resistance,
        }
    }

    fn apply_events(&mut self, t: f64) {
        let tc = self.scenario.controller.tc;
        while let Some(event) = self.scenario.events.get(self.next_event) {
            if event.time > t + TIME_TOLERANCE * tc {
                break;
            }
            self.plant.resistance = event.new_r;
            self.next_event += 1;
        }
    }

    /// Runs one control period. Returns `None` once the horizon is covered.
    pub fn step(&mut self) -> Result<Option<TimeSeriesRecord>> {
        if self.is_finished() {
            return Ok(None);
        }
        let cfg = self.scenario.controller;
        let t = self.period as f64 * cfg.tc;
        self.apply_events(t);

        let y = self.controller.filter(&cfg, self.state.v_c)?;
        let y_ref = reference_at(&self.scenario.reference, t);
        let duty = self.controller.step(&cfg, y, y_ref)?;

        let plant = self.plant;
        let n = self.scenario.substeps_per_period;
        let h = cfg.tc / n as f64;
        let mut x = self.state;
        for j in 0..n {
            x = rk4_step(
                |s: &PlantState, _| {
                    let d = averaged_rhs(s, duty, &plant);
                    PlantState::new(d.di_l, d.dv_c)
                },
                x,
                t + j as f64 * h,
                h,
            )?;
        }
        self.state = x;
        self.period += 1;

        let t_next = self.period as f64 * cfg.tc;
        Ok(Some(TimeSeriesRecord {
            t: t_next,
            v_ref: reference_at(&self.scenario.reference, t_next),
            v_out: x.v_c,
            i_l: x.i_l,
            duty,
            mode: averaged_rhs(&x, duty, &plant).mode,
            r: plant.resistance,
        }))
    }
}

/// Runs the whole scenario: `periods + 1` records including the initial row.
pub fn run_closed_loop(scenario: &Scenario) -> Result<Vec<TimeSeriesRecord>> {
    let mut lp = ClosedLoop::new(scenario)?;
    let mut records = Vec::with_capacity(lp.periods + 1);
    records.push(lp.initial_record());
    while let Some(record) = lp.step()? {
        records.push(record);
    }
    Ok(records)
}

/// Integrates the averaged model at a fixed duty, one record per switching period.
///
/// Records carry `v_ref = NaN`: there is no reference in open loop.
pub fn run_open_loop(
    params: &BoostParams,
    d1: f64,
    t_end: f64,
    x0: PlantState,
    substeps: usize,
) -> Result<Vec<TimeSeriesRecord>> {
    check_duty(d1)?;
    params.validate()?;
    ensure_finite(t_end, "t_end")?;
    if t_end < 0.0 {
        return Err(Error::invalid("t_end must not be negative"));
    }
    if substeps == 0 {
        return Err(Error::invalid("substeps must be positive"));
    }
    if !x0.is_finite() {
        return Err(Error::NonFinite("initial state"));
    }
    let ts = params.period();
    let n = periods(t_end, ts);
    let h = ts / substeps as f64;
    let record = |t: f64, x: &PlantState| TimeSeriesRecord {
        t,
        v_ref: f64::NAN,
        v_out: x.v_c,
        i_l: x.i_l,
        duty: d1,
        mode: averaged_rhs(x, d1, params).mode,
        r: params.resistance,
    };
    let mut x = x0;
    let mut records = Vec::with_capacity(n + 1);
    records.push(record(0.0, &x));
    for k in 0..n {
        let t0 = k as f64 * ts;
        for j in 0..substeps {
            x = rk4_step(
                |s: &PlantState, _| {
                    let d = averaged_rhs(s, d1, params);
                    PlantState::new(d.di_l, d.dv_c)
                },
                x,
                t0 + j as f64 * h,
                h,
            )?;
        }
        records.push(record((k + 1) as f64 * ts, &x));
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plant::dcm_static_output;

    fn fig2() -> Scenario {
        Scenario::default()
    }

    #[test]
    fn zero_horizon_gives_initial_row() {
        let sc = Scenario {
            t_end: 0.0,
            ..fig2()
        };
        let rows = run_closed_loop(&sc).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].t, 0.0);
        assert_eq!(rows[0].v_out, 12.0);
        assert_eq!(rows[0].duty, 0.01);
    }

    #[test]
    fn record_count_and_spacing() {
        let sc = Scenario {
            t_end: 0.12,
            ..fig2()
        };
        let rows = run_closed_loop(&sc).unwrap();
        assert_eq!(rows.len(), 1201);
        for pair in rows.windows(2) {
            assert!(pair[1].t > pair[0].t);
            assert!((pair[1].t - pair[0].t - 1e-4).abs() < 1e-12);
        }
        let partial = Scenario {
            t_end: 0.00025,
            ..fig2()
        };
        assert_eq!(run_closed_loop(&partial).unwrap().len(), 4);
    }

    #[test]
    fn events_apply_at_first_boundary_not_before() {
        let sc = Scenario {
            events: vec![LoadEvent {
                time: 0.00105,
                new_r: 50.0,
            }],
            t_end: 0.002,
            ..fig2()
        };
        let rows = run_closed_loop(&sc).unwrap();
        // period starting at 0.0011 is the first with t_k >= 0.00105
        for row in &rows {
            if row.t <= 0.0011 + 1e-12 {
                assert_eq!(row.r, 100.0, "t = {}", row.t);
            } else {
                assert_eq!(row.r, 50.0, "t = {}", row.t);
            }
        }
    }

    #[test]
    fn event_at_zero_applies_to_initial_row() {
        let sc = Scenario {
            events: vec![LoadEvent {
                time: 0.0,
                new_r: 60.0,
            }],
            t_end: 0.001,
            ..fig2()
        };
        assert!(run_closed_loop(&sc).unwrap().iter().all(|r| r.r == 60.0));
    }

    #[test]
    fn duty_is_held_within_period() {
        // the loop stepper advances whole periods with one duty; verify by replay
        let sc = Scenario {
            t_end: 0.005,
            ..fig2()
        };
        let rows = run_closed_loop(&sc).unwrap();
        let mut x = sc.x0;
        for pair in rows.windows(2) {
            let duty = pair[1].duty;
            let h = 1e-4 / 20.0;
            for j in 0..20 {
                x = rk4_step(
                    |s: &PlantState, _| {
                        let d = averaged_rhs(s, duty, &sc.plant);
                        PlantState::new(d.di_l, d.dv_c)
                    },
                    x,
                    pair[0].t + j as f64 * h,
                    h,
                )
                .unwrap();
            }
            assert_eq!(x.v_c, pair[1].v_out);
        }
    }

    #[test]
    fn deterministic() {
        let sc = fig2();
        assert_eq!(run_closed_loop(&sc).unwrap(), run_closed_loop(&sc).unwrap());
    }

    #[test]
    fn validation_errors() {
        let mismatched = Scenario {
            controller: IpiConfig {
                tc: 2e-4,
                ..IpiConfig::default()
            },
            ..fig2()
        };
        assert!(mismatched.validate().is_err());
        let unsorted = Scenario {
            events: vec![
                LoadEvent {
                    time: 0.02,
                    new_r: 50.0,
                },
                LoadEvent {
                    time: 0.01,
                    new_r: 60.0,
                },
            ],
            ..fig2()
        };
        assert!(unsorted.validate().is_err());
        assert!(Scenario {
            substeps_per_period: 1,
            ..fig2()
        }
        .validate()
        .is_err());
        assert!(Scenario {
            t_end: -1.0,
            ..fig2()
        }
        .validate()
        .is_err());
    }

    #[test]
    fn open_loop_ccm_equilibrium() {
        let p = BoostParams {
            resistance: 50.0,
            ..BoostParams::default()
        };
        let rows = run_open_loop(&p, 0.5, 0.1, PlantState::new(0.0, 12.0), 20).unwrap();
        let v = rows.last().unwrap().v_out;
        assert!((v - 24.0).abs() < 0.24, "{v}");
    }

    #[test]
    fn open_loop_zero_duty_settles_at_input() {
        // the LC tank overshoots E on the way, but the average ends at E
        let p = BoostParams {
            resistance: 50.0,
            ..BoostParams::default()
        };
        let rows = run_open_loop(&p, 0.0, 0.1, PlantState::default(), 20).unwrap();
        let last = rows.last().unwrap();
        assert!((last.v_out - 12.0).abs() < 0.12, "{}", last.v_out);
        assert!(rows.iter().all(|r| r.i_l >= 0.0));
    }

    #[test]
    fn open_loop_dcm_matches_quadratic() {
        let p = BoostParams {
            resistance: 2000.0,
            ..BoostParams::default()
        };
        let target = dcm_static_output(0.2, &p).unwrap().voltage;
        let rows = run_open_loop(&p, 0.2, 0.3, PlantState::new(0.0, 12.0), 20).unwrap();
        let last = rows.last().unwrap();
        assert!(
            (last.v_out - target).abs() < 0.01 * target,
            "{}",
            last.v_out
        );
        assert_eq!(last.mode, ConductionMode::Dcm);
    }
}
