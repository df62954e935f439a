//! Scenario files, built-in presets, CSV output and plot scripts.
//!
//! A scenario file is line oriented:
//!
//! ```text
//! # comment
//! [plant]
//! r = 100
//! [controller]
//! alpha = 30
//! [reference]
//! kind = exponential
//! tau = 0.01
//! [events]
//! at 0.06 set_r 50
//! [sim]
//! t_end = 0.12
//! ```
//!
//! Sections: `plant` (l, c, r, e, fc), `controller` (alpha, kp, ki, tc,
//! u_min, u_max, filter_window), `reference` (kind, level, v0, vf, tau),
//! `events` (`at <seconds> set_r <ohms>` lines) and `sim` (t_end,
//! substeps_per_period, x0_il, x0_vc). Every key is optional; omitted keys
//! take the values of [`Scenario::default`], except that `tc` follows `1/fc`
//! and `x0_vc` and the exponential `v0` follow `e`. Unknown sections or keys
//! are errors.

use std::collections::HashMap;
use std::fmt::{self, Write as _};
use std::io::Write;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::plant::PlantState;
use crate::sim::{LoadEvent, ReferenceSpec, Scenario, TimeSeriesRecord};

pub const CSV_HEADER: &str = "t,v_ref,v_out,i_l,duty,mode,r";

const DEFAULT_LEVEL: f64 = 24.0;
const DEFAULT_FINAL: f64 = 24.0;
const DEFAULT_TAU: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Section {
    Plant,
    Controller,
    Reference,
    Events,
    Sim,
}

impl Section {
    fn parse(name: &str) -> Option<Self> {
        Some(match name {
            "plant" => Section::Plant,
            "controller" => Section::Controller,
            "reference" => Section::Reference,
            "events" => Section::Events,
            "sim" => Section::Sim,
            _ => return None,
        })
    }

    fn keys(self) -> &'static [&'static str] {
        match self {
            Section::Plant => &["l", "c", "r", "e", "fc"],
            Section::Controller => &["alpha", "kp", "ki", "tc", "u_min", "u_max", "filter_window"],
            Section::Reference => &["kind", "level", "v0", "vf", "tau"],
            Section::Events => &[],
            Section::Sim => &["t_end", "substeps_per_period", "x0_il", "x0_vc"],
        }
    }
}

fn parse_error(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

fn number(text: &str, line: usize) -> Result<f64> {
    match text.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(parse_error(
            line,
            format!("expected a finite number, got `{text}`"),
        )),
    }
}

fn count(text: &str, line: usize) -> Result<usize> {
    text.parse::<usize>().map_err(|_| {
        parse_error(
            line,
            format!("expected a non-negative integer, got `{text}`"),
        )
    })
}

/// Raw `key = value` entries with their line numbers.
#[derive(Default)]
struct Entries {
    values: HashMap<(usize, &'static str), (String, usize)>,
}

impl Entries {
    fn get(&self, section: Section, key: &'static str) -> Option<(&str, usize)> {
        self.values
            .get(&(section as usize, key))
            .map(|(v, l)| (v.as_str(), *l))
    }

    fn number(&self, section: Section, key: &'static str) -> Result<Option<(f64, usize)>> {
        self.get(section, key)
            .map(|(v, line)| number(v, line).map(|n| (n, line)))
            .transpose()
    }
}

/// Parses and validates a scenario document.
pub fn parse_scenario(text: &str) -> Result<Scenario> {
    let mut entries = Entries::default();
    let mut events: Vec<(LoadEvent, usize)> = Vec::new();
    let mut section: Option<Section> = None;
    let mut seen_sections: Vec<Section> = Vec::new();

    for (index, raw) in text.lines().enumerate() {
        let line = index + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(rest) = content.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| parse_error(line, format!("malformed section header `{content}`")))?
                .trim();
            let parsed = Section::parse(name)
                .ok_or_else(|| parse_error(line, format!("unknown section `{name}`")))?;
            if seen_sections.contains(&parsed) {
                return Err(parse_error(line, format!("duplicate section `{name}`")));
            }
            seen_sections.push(parsed);
            section = Some(parsed);
            continue;
        }
        let current = section.ok_or_else(|| parse_error(line, "entry outside of any section"))?;

        if current == Section::Events {
            let words: Vec<&str> = content.split_whitespace().collect();
            match words.as_slice() {
                ["at", time, "set_r", r] => {
                    let event = LoadEvent {
                        time: number(time, line)?,
                        new_r: number(r, line)?,
                    };
                    events.push((event, line));
                }
                _ => {
                    return Err(parse_error(
                        line,
                        format!("expected `at <seconds> set_r <ohms>`, got `{content}`"),
                    ))
                }
            }
            continue;
        }

        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| parse_error(line, format!("expected `key = value`, got `{content}`")))?;
        let (key, value) = (key.trim(), value.trim());
        let known = current
            .keys()
            .iter()
            .find(|k| **k == key)
            .ok_or_else(|| parse_error(line, format!("unknown key `{key}`")))?;
        if value.is_empty() {
            return Err(parse_error(line, format!("missing value for `{key}`")));
        }
        if entries
            .values
            .insert((current as usize, known), (value.to_string(), line))
            .is_some()
        {
            return Err(parse_error(line, format!("duplicate key `{key}`")));
        }
    }

    build(&entries, events)
}

fn build(entries: &Entries, events: Vec<(LoadEvent, usize)>) -> Result<Scenario> {
    let mut sc = Scenario::default();

    let positive = |section, key| -> Result<Option<f64>> {
        match entries.number(section, key)? {
            Some((v, line)) if v <= 0.0 => {
                Err(parse_error(line, format!("{key} must be positive")))
            }
            other => Ok(other.map(|(v, _)| v)),
        }
    };
    if let Some(v) = positive(Section::Plant, "l")? {
        sc.plant.inductance = v;
    }
    if let Some(v) = positive(Section::Plant, "c")? {
        sc.plant.capacitance = v;
    }
    if let Some(v) = positive(Section::Plant, "r")? {
        sc.plant.resistance = v;
    }
    if let Some(v) = positive(Section::Plant, "e")? {
        sc.plant.input_voltage = v;
    }
    if let Some(v) = positive(Section::Plant, "fc")? {
        sc.plant.switching_frequency = v;
    }
    let e = sc.plant.input_voltage;
    let ts = sc.plant.period();

    let ctl = &mut sc.controller;
    ctl.tc = ts;
    if let Some((v, line)) = entries.number(Section::Controller, "alpha")? {
        if v == 0.0 {
            return Err(parse_error(line, "alpha must be nonzero"));
        }
        ctl.alpha = v;
    }
    for (key, slot) in [("kp", &mut ctl.kp), ("ki", &mut ctl.ki)] {
        if let Some((v, line)) = entries.number(Section::Controller, key)? {
            if v < 0.0 {
                return Err(parse_error(line, format!("{key} must be non-negative")));
            }
            *slot = v;
        }
    }
    if let Some((v, line)) = entries.number(Section::Controller, "tc")? {
        if v <= 0.0 {
            return Err(parse_error(line, "tc must be positive"));
        }
        if (v - ts).abs() > 1e-9 * ts {
            return Err(parse_error(
                line,
                format!("tc = {v} must equal the switching period 1/fc = {ts}"),
            ));
        }
        ctl.tc = v;
    }
    let u_min = entries.number(Section::Controller, "u_min")?;
    let u_max = entries.number(Section::Controller, "u_max")?;
    if let Some((v, _)) = u_min {
        ctl.u_min = v;
    }
    if let Some((v, _)) = u_max {
        ctl.u_max = v;
    }
    if !(0.0 <= ctl.u_min && ctl.u_min < ctl.u_max && ctl.u_max <= 1.0) {
        let line = u_max.or(u_min).map(|(_, l)| l).unwrap_or(0);
        return Err(parse_error(
            line,
            "duty clamps must satisfy 0 <= u_min < u_max <= 1",
        ));
    }
    if let Some((v, line)) = entries.get(Section::Controller, "filter_window") {
        ctl.filter_window = count(v, line)?;
    }

    sc.reference = build_reference(entries, e)?;

    let mut previous: Option<f64> = None;
    for (event, line) in events {
        if event.time < 0.0 {
            return Err(parse_error(line, "event time must not be negative"));
        }
        if event.new_r <= 0.0 {
            return Err(parse_error(line, "event load must be positive"));
        }
        if previous.is_some_and(|p| event.time <= p) {
            return Err(parse_error(
                line,
                "events must be listed in strictly increasing time",
            ));
        }
        previous = Some(event.time);
        sc.events.push(event);
    }

    if let Some((v, line)) = entries.number(Section::Sim, "t_end")? {
        if v < 0.0 {
            return Err(parse_error(line, "t_end must not be negative"));
        }
        sc.t_end = v;
    }
    if let Some((v, line)) = entries.get(Section::Sim, "substeps_per_period") {
        let n = count(v, line)?;
        if n < 2 {
            return Err(parse_error(line, "substeps_per_period must be at least 2"));
        }
        sc.substeps_per_period = n;
    }
    sc.x0 = PlantState::new(0.0, e);
    if let Some((v, line)) = entries.number(Section::Sim, "x0_il")? {
        if v < 0.0 {
            return Err(parse_error(line, "x0_il must not be negative"));
        }
        sc.x0.i_l = v;
    }
    if let Some((v, _)) = entries.number(Section::Sim, "x0_vc")? {
        sc.x0.v_c = v;
    }

    sc.validate()
        .map_err(|err| parse_error(0, err.to_string()))?;
    Ok(sc)
}

fn build_reference(entries: &Entries, e: f64) -> Result<ReferenceSpec> {
    let kind = entries.get(Section::Reference, "kind");
    let exponential = match kind {
        None | Some(("constant", _)) => false,
        Some(("exponential", _)) => true,
        Some((other, line)) => {
            return Err(parse_error(
                line,
                format!("unknown reference kind `{other}` (expected constant or exponential)"),
            ))
        }
    };
    let foreign: &[&'static str] = if exponential {
        &["level"]
    } else {
        &["v0", "vf", "tau"]
    };
    for key in foreign {
        if let Some((_, line)) = entries.get(Section::Reference, key) {
            let kind = if exponential {
                "exponential"
            } else {
                "constant"
            };
            return Err(parse_error(
                line,
                format!("`{key}` does not apply to a {kind} reference"),
            ));
        }
    }
    let value = |key, default| -> Result<f64> {
        Ok(entries
            .number(Section::Reference, key)?
            .map_or(default, |(v, _)| v))
    };
    if !exponential {
        return Ok(ReferenceSpec::Constant {
            level: value("level", DEFAULT_LEVEL)?,
        });
    }
    if let Some((tau, line)) = entries.number(Section::Reference, "tau")? {
        if tau <= 0.0 {
            return Err(parse_error(line, "tau must be positive"));
        }
    }
    Ok(ReferenceSpec::Exponential {
        v0: value("v0", e)?,
        vf: value("vf", DEFAULT_FINAL)?,
        tau: value("tau", DEFAULT_TAU)?,
    })
}

/// Prints every field explicitly; the output parses back to an equal scenario.
impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let p = &self.plant;
        let c = &self.controller;
        writeln!(f, "[plant]")?;
        writeln!(f, "l = {}", p.inductance)?;
        writeln!(f, "c = {}", p.capacitance)?;
        writeln!(f, "r = {}", p.resistance)?;
        writeln!(f, "e = {}", p.input_voltage)?;
        writeln!(f, "fc = {}", p.switching_frequency)?;
        writeln!(f)?;
        writeln!(f, "[controller]")?;
        writeln!(f, "alpha = {}", c.alpha)?;
        writeln!(f, "kp = {}", c.kp)?;
        writeln!(f, "ki = {}", c.ki)?;
        writeln!(f, "tc = {}", c.tc)?;
        writeln!(f, "u_min = {}", c.u_min)?;
        writeln!(f, "u_max = {}", c.u_max)?;
        writeln!(f, "filter_window = {}", c.filter_window)?;
        writeln!(f)?;
        writeln!(f, "[reference]")?;
        match self.reference {
            ReferenceSpec::Constant { level } => {
                writeln!(f, "kind = constant")?;
                writeln!(f, "level = {level}")?;
            }
            ReferenceSpec::Exponential { v0, vf, tau } => {
                writeln!(f, "kind = exponential")?;
                writeln!(f, "v0 = {v0}")?;
                writeln!(f, "vf = {vf}")?;
                writeln!(f, "tau = {tau}")?;
            }
        }
        writeln!(f)?;
        writeln!(f, "[events]")?;
        for event in &self.events {
            writeln!(f, "at {} set_r {}", event.time, event.new_r)?;
        }
        writeln!(f)?;
        writeln!(f, "[sim]")?;
        writeln!(f, "t_end = {}", self.t_end)?;
        writeln!(f, "substeps_per_period = {}", self.substeps_per_period)?;
        writeln!(f, "x0_il = {}", self.x0.i_l)?;
        writeln!(f, "x0_vc = {}", self.x0.v_c)
    }
}

/// The four built-in scenarios: one constant-reference start-up and three
/// load steps under an exponential reference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Preset {
    Fig2,
    Fig3,
    Fig4,
    Fig5,
}

impl Preset {
    pub const ALL: [Preset; 4] = [Preset::Fig2, Preset::Fig3, Preset::Fig4, Preset::Fig5];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Fig2 => "fig2",
            Preset::Fig3 => "fig3",
            Preset::Fig4 => "fig4",
            Preset::Fig5 => "fig5",
        }
    }

    pub fn scenario(self) -> Scenario {
        let base = Scenario::default();
        let e = base.plant.input_voltage;
        let step = |r0: f64, time: f64, new_r: f64| {
            let mut sc = Scenario {
                reference: ReferenceSpec::Exponential {
                    v0: e,
                    vf: DEFAULT_FINAL,
                    tau: DEFAULT_TAU,
                },
                events: vec![LoadEvent { time, new_r }],
                t_end: 0.12,
                ..base.clone()
            };
            sc.plant.resistance = r0;
            sc
        };
        match self {
            Preset::Fig2 => base,
            Preset::Fig3 => step(100.0, 0.06, 50.0),
            Preset::Fig4 => step(60.0, 0.06, 100.0),
            Preset::Fig5 => step(100.0, 0.01, 200.0),
        }
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::UnknownPreset(s.to_string()))
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

pub fn preset(name: &str) -> Result<Scenario> {
    Ok(name.parse::<Preset>()?.scenario())
}

/// Writes the series as CSV and returns the number of bytes written.
pub fn write_csv<W: Write>(series: &[TimeSeriesRecord], mut out: W) -> Result<usize> {
    if series.is_empty() {
        return Err(Error::invalid("cannot write an empty series"));
    }
    let mut text = String::with_capacity(64 * (series.len() + 1));
    text.push_str(CSV_HEADER);
    text.push('\n');
    for r in series {
        // writing into a String cannot fail
        let _ = writeln!(
            text,
            "{},{},{},{},{},{},{}",
            r.t, r.v_ref, r.v_out, r.i_l, r.duty, r.mode, r.r
        );
    }
    out.write_all(text.as_bytes())?;
    out.flush()?;
    Ok(text.len())
}

fn gnuplot_quote(s: &str) -> String {
    format!("'{}'", s.replace('\'', "''"))
}

/// Emits a gnuplot script that plots `v_ref` and `v_out` against `t` with the
/// duty on a second axis, marks each event time, and writes an SVG to `out_path`.
pub fn emit_plot_script(csv_path: &str, out_path: &str, event_times: &[f64]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# gnuplot script generated by boost-ipi");
    let _ = writeln!(s, "set terminal svg size 1000,600 dynamic enhanced");
    let _ = writeln!(s, "set output {}", gnuplot_quote(out_path));
    let _ = writeln!(s, "set datafile separator ','");
    let _ = writeln!(s, "set key outside top center horizontal");
    let _ = writeln!(s, "set grid");
    let _ = writeln!(s, "set xlabel 't [s]'");
    let _ = writeln!(s, "set ylabel 'voltage [V]'");
    let _ = writeln!(s, "set y2label 'duty'");
    let _ = writeln!(s, "set y2range [0:1]");
    let _ = writeln!(s, "set ytics nomirror");
    let _ = writeln!(s, "set y2tics");
    for t in event_times {
        let _ = writeln!(
            s,
            "set arrow from {t}, graph 0 to {t}, graph 1 nohead dashtype 2 linecolor rgb 'gray40'"
        );
        let _ = writeln!(
            s,
            "set label 'load step t = {t} s' at {t}, graph 0.95 offset 0.5,0"
        );
    }
    let data = gnuplot_quote(csv_path);
    let _ = writeln!(
        s,
        "plot {data} using (column('t')):(column('v_ref')) with lines title 'v_ref', \\"
    );
    let _ = writeln!(
        s,
        "     {data} using (column('t')):(column('v_out')) with lines title 'v_out', \\"
    );
    let _ = writeln!(
        s,
        "     {data} using (column('t')):(column('duty')) axes x1y2 with lines title 'duty'"
    );
    s
}
