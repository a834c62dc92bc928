//! Dispatch from a validated config to the computation modules.

use anyhow::{bail, Result};
use hplab::brickwork::Boundary;
use hplab::hpcore::{decoding_series, describe_spec, HPPartition};
use hplab::membrane::{front_width, haar_mc_series, membrane_series, sample_seed};
use hplab::predictions::{
    duc_plateau, integrable_du_delta, perturbed_decay, scrambled_plateau_from_strings, transmission_length,
    yoshida_kitaev_bound, Formula,
};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::config::{ExperimentConfig, Mode, SweepBase};
use crate::CliError;

/// A CSV table plus per-point provenance for the sidecar.
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
    pub points: Vec<Value>,
}

pub const SERIES_COLUMNS: [&str; 4] = ["t", "delta", "method", "seed"];

pub fn float(v: f64) -> String {
    format!("{v:.16e}")
}

fn row(t: Option<usize>, delta: f64, method: &str, seed: Option<u64>) -> Vec<String> {
    vec![
        t.map(|t| t.to_string()).unwrap_or_default(),
        float(delta),
        method.to_string(),
        seed.map(|s| s.to_string()).unwrap_or_default(),
    ]
}

/// One evaluation point: system size and partition, plus its seed.
#[derive(Clone, Copy, Debug)]
struct Point {
    l: usize,
    l_a: usize,
    l_d: usize,
    seed: Option<u64>,
}

struct Output {
    rows: Vec<Vec<String>>,
    provenance: Value,
}

pub fn run(cfg: &ExperimentConfig, mode: Mode, seed: Option<u64>) -> Result<Table> {
    if let Some(m) = cfg.mode {
        if m != mode {
            bail!(CliError::config(format!("config says mode = {} but the subcommand is {}", m.tag(), mode.tag())));
        }
    }
    let single = |base| -> Result<Table> {
        let c = cfg.circuit(mode.tag())?;
        let p = cfg.partition(mode.tag())?;
        let out = evaluate(cfg, base, Point { l: c.l, l_a: p.l_a, l_d: p.l_d, seed })?;
        Ok(Table { columns: columns(base), rows: out.rows, points: vec![out.provenance] })
    };
    match mode {
        Mode::Exact => single(SweepBase::Exact),
        Mode::Membrane => single(SweepBase::Membrane),
        Mode::Mc => single(SweepBase::Mc),
        Mode::Predict => single(SweepBase::Predict),
        Mode::Sweep => sweep(cfg, seed),
    }
}

fn columns(base: SweepBase) -> Vec<&'static str> {
    let mut c = SERIES_COLUMNS.to_vec();
    if base == SweepBase::Mc {
        c.push("std_err");
    }
    c
}

fn evaluate(cfg: &ExperimentConfig, base: SweepBase, pt: Point) -> Result<Output> {
    match base {
        SweepBase::Exact => exact(cfg, pt),
        SweepBase::Membrane => membrane(cfg, pt),
        SweepBase::Mc => mc(cfg, pt),
        SweepBase::Predict => predict(cfg, pt),
        SweepBase::FrontWidth => bail!(CliError::config("front-width is only available as a sweep base")),
    }
}

fn exact(cfg: &ExperimentConfig, pt: Point) -> Result<Output> {
    let c = cfg.circuit("exact")?;
    let seed = if c.is_random() { pt.seed } else { None };
    let spec = c.spec(pt.l, seed)?;
    spec.check_exact_capacity()?;
    let p = HPPartition::for_spec(&spec, pt.l_a, pt.l_d)?;
    let times = cfg.times("exact")?;
    let series = decoding_series(&spec, &p, &times)?;
    let rows = series.points.iter().map(|&(t, d)| row(Some(t), d, series.method.tag(), seed)).collect();
    let provenance = json!({
        "l": pt.l, "l_a": pt.l_a, "l_d": pt.l_d, "seed": seed,
        "circuit": describe_spec(&spec),
        "layers": spec.parity.describe(),
    });
    Ok(Output { rows, provenance })
}

fn membrane(cfg: &ExperimentConfig, pt: Point) -> Result<Output> {
    let c = cfg.circuit("membrane")?;
    if c.boundary != Boundary::Open {
        bail!(CliError::config("the membrane model is defined for open boundaries"));
    }
    let times = cfg.times("membrane")?;
    if let Some(t) = times.iter().find(|t| *t % 2 == 0) {
        bail!(CliError::config(format!("membrane times must be odd, got {t}")));
    }
    let t_max = *times.iter().max().expect("nonempty");
    let series = membrane_series(pt.l, pt.l_a, pt.l_d, c.q, t_max)?;
    let rows = times
        .iter()
        .map(|&t| row(Some(t), series.value_at(t).expect("odd t <= t_max"), series.method.tag(), None))
        .collect();
    let provenance = json!({ "l": pt.l, "l_a": pt.l_a, "l_d": pt.l_d, "q": c.q, "model": series.spec });
    Ok(Output { rows, provenance })
}

fn mc(cfg: &ExperimentConfig, pt: Point) -> Result<Output> {
    let c = cfg.circuit("mc")?;
    if c.boundary != Boundary::Open {
        bail!(CliError::config("Monte Carlo averages use open boundaries"));
    }
    let samples = cfg.mc.ok_or_else(|| CliError::config("mode mc needs [mc]"))?.samples;
    let seed = pt.seed.ok_or_else(|| CliError::config("mode mc needs a seed (config `seed` or --seed)"))?;
    let p = HPPartition::new(c.q, pt.l, pt.l_a, pt.l_d)?;
    let times = cfg.times("mc")?;
    let est = haar_mc_series(&p, &times, samples, seed)?;
    let rows = est
        .iter()
        .map(|(t, e)| {
            let mut r = row(Some(*t), e.mean, "mc", Some(seed));
            r.push(float(e.std_err));
            r
        })
        .collect();
    let provenance = json!({
        "l": pt.l, "l_a": pt.l_a, "l_d": pt.l_d, "q": c.q, "seed": seed, "samples": samples,
        "sample_seeds": "sample i uses sample_seed(seed, i)",
    });
    Ok(Output { rows, provenance })
}

fn predict(cfg: &ExperimentConfig, pt: Point) -> Result<Output> {
    let pc = cfg.predict.ok_or_else(|| CliError::config("mode predict needs [predict]"))?;
    let c = cfg.circuit("predict")?;
    let q = c.q;
    let p = HPPartition::new(q, pt.l, pt.l_a, pt.l_d)?;
    let method = pc.formula.tag();
    // Time-independent formulas give one row with an empty `t`, or the
    // same value at every requested time.
    let constant = |v: f64| -> Result<Vec<Vec<String>>> {
        Ok(match &cfg.times {
            Some(g) => g.expand()?.into_iter().map(|t| row(Some(t), v, method, None)).collect(),
            None => vec![row(None, v, method, None)],
        })
    };
    let (rows, validity) = match pc.formula {
        Formula::DucPlateau => {
            let r = duc_plateau(q, pt.l_a, pt.l_d)?;
            (constant(r.value)?, r.validity)
        }
        Formula::ScrambledPlateau => {
            let r = scrambled_plateau_from_strings(q, pt.l_a, pt.l_d)?;
            (constant(r.value)?, r.validity)
        }
        Formula::YoshidaKitaev => {
            let r = yoshida_kitaev_bound(&p);
            (constant(r.value)?, r.validity)
        }
        Formula::TransmissionLength => {
            let g = c.gate()?.ok_or_else(|| CliError::config("transmission-length needs a fixed gate"))?;
            let r = transmission_length(&g)?;
            (constant(r.value)?, r.validity)
        }
        Formula::IntegrableDu => {
            let g = c.gate()?.ok_or_else(|| CliError::config("integrable-du needs a fixed gate"))?;
            if c.boundary != Boundary::Open {
                bail!(CliError::config("integrable-du describes open boundaries"));
            }
            let mut rows = Vec::new();
            let mut validity = "";
            for t in cfg.times("predict")? {
                let r = integrable_du_delta(&g, t, pt.l)?;
                validity = r.validity;
                rows.push(row(Some(t), r.value, method, None));
            }
            (rows, validity)
        }
        Formula::PerturbedDecay => {
            let z1 = match pc.z1 {
                Some(z) => z,
                None => {
                    let g = c.gate()?.ok_or_else(|| CliError::config("perturbed-decay needs z1 or a fixed gate"))?;
                    g.characterize().z1().max(0.0)
                }
            };
            let plateau = duc_plateau(q, pt.l_a, pt.l_d)?.value;
            let mut rows = Vec::new();
            let mut validity = "";
            for t in cfg.times("predict")? {
                if t < pt.l || (t - pt.l) % 2 != 0 {
                    bail!(CliError::config(format!("perturbed-decay needs t >= L with t - L even, got t={t} L={}", pt.l)));
                }
                let r = perturbed_decay(q, (t - pt.l + 2) / 2, pt.l, z1)?;
                validity = r.validity;
                rows.push(row(Some(t), plateau + r.value, method, None));
            }
            (rows, validity)
        }
    };
    let provenance = json!({
        "l": pt.l, "l_a": pt.l_a, "l_d": pt.l_d, "q": q,
        "formula": method, "validity": validity,
    });
    Ok(Output { rows, provenance })
}

fn sweep(cfg: &ExperimentConfig, seed: Option<u64>) -> Result<Table> {
    let sw = cfg.sweep.as_ref().ok_or_else(|| CliError::config("mode sweep needs [sweep]"))?;
    let c = cfg.circuit("sweep")?;
    let ls = sw.l.clone().unwrap_or_else(|| vec![c.l]);
    if sw.base == SweepBase::FrontWidth {
        let th = sw.thresholds.unwrap_or((0.75, 0.25));
        let widths: Vec<f64> = ls.par_iter().map(|&l| front_width(l, c.q, th)).collect::<hplab::Result<_>>()?;
        let rows = ls.iter().zip(&widths).map(|(l, w)| vec![l.to_string(), float(*w)]).collect();
        let points = ls.iter().map(|l| json!({ "l": l, "q": c.q, "thresholds": [th.0, th.1] })).collect();
        return Ok(Table { columns: vec!["l", "width"], rows, points });
    }
    let part = cfg.partition;
    let pick = |v: &Option<Vec<usize>>, d: Option<usize>, name: &str| -> Result<Vec<usize>> {
        match (v, d) {
            (Some(v), _) if !v.is_empty() => Ok(v.clone()),
            (None, Some(d)) => Ok(vec![d]),
            _ => bail!(CliError::config(format!("sweep needs `{name}` values or [partition]"))),
        }
    };
    let l_as = pick(&sw.l_a, part.map(|p| p.l_a), "l_a")?;
    let l_ds = pick(&sw.l_d, part.map(|p| p.l_d), "l_d")?;
    let mut points = Vec::new();
    for &l in &ls {
        for &l_a in &l_as {
            for &l_d in &l_ds {
                let seed = seed.map(|s| sample_seed(s, points.len()));
                points.push(Point { l, l_a, l_d, seed });
            }
        }
    }
    let outs: Vec<Output> = points.par_iter().map(|&pt| evaluate(cfg, sw.base, pt)).collect::<Result<_>>()?;
    let mut columns = columns(sw.base);
    columns.extend(["l", "l_a", "l_d"]);
    let mut rows = Vec::new();
    let mut prov = Vec::new();
    for (pt, out) in points.iter().zip(outs) {
        for mut r in out.rows {
            r.extend([pt.l.to_string(), pt.l_a.to_string(), pt.l_d.to_string()]);
            rows.push(r);
        }
        prov.push(out.provenance);
    }
    Ok(Table { columns, rows, points: prov })
}
