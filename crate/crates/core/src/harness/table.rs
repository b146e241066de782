use std::fmt;

use serde::{Deserialize, Serialize};

use crate::bounds::{self, BoundsError, DerivedParams, QUOTED_MU};

/// Inputs of the bounds table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundsQuery {
    pub alpha: f64,
    pub beta: f64,
    pub delta_net: f64,
    pub delta_typ: f64,
    pub m: usize,
    pub eps: f64,
    pub k: f64,
    pub interval: f64,
}

impl Default for BoundsQuery {
    fn default() -> Self {
        Self {
            alpha: 6.0,
            beta: 2.0,
            delta_net: 1.0 / 1800.0,
            delta_typ: 0.3285,
            m: 0,
            eps: 1e-9,
            k: 26000.0,
            interval: 100.0,
        }
    }
}

/// Every closed-form quantity for one parameter point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsReport {
    pub query: BoundsQuery,
    pub derived: DerivedParams,
    pub admissibility_lhs: f64,
    pub admissible: bool,
    pub good_event_bound: f64,
    pub typical_event_bound: f64,
    pub depth_bound: f64,
    /// The depth bound with the reference prefactor in place of `mu`.
    pub depth_bound_quoted_mu: f64,
    pub quoted_mu: f64,
    /// Whether the formula's `mu` is within 1% of the reference.
    pub quoted_mu_reproduced: bool,
    pub min_interval: f64,
    pub min_depth: f64,
    /// Prism leader confirmation time measured from `R_h`, when defined.
    pub leader_time: Option<f64>,
    pub tx_depth: Option<u64>,
    /// Prism transaction confirmation time measured from `r`.
    pub tx_time: Option<f64>,
    pub notes: Vec<String>,
}

pub fn bounds_report(q: &BoundsQuery) -> Result<BoundsReport, BoundsError> {
    let d = bounds::derive(q.alpha, q.delta_net, q.delta_typ)?;
    let adm = bounds::admissible(q.alpha, q.beta, q.delta_net, q.delta_typ)?;
    let ev = bounds::event_bounds(&d, 0.0, q.interval);
    let quoted = DerivedParams { mu: QUOTED_MU, ..d };
    let mut notes = Vec::new();
    let quoted_mu_reproduced = ((d.mu - QUOTED_MU) / QUOTED_MU).abs() < 0.01;
    if !quoted_mu_reproduced {
        notes.push(format!("quoted mu = {QUOTED_MU} is not reproduced; the formula gives {:.6}", d.mu));
    }
    let (mut leader_time, mut tx_depth, mut tx_time) = (None, None, None);
    if q.m > 0 {
        match bounds::prism_leader_time(0.0, q.eps, q.m, &d, q.alpha, q.delta_net) {
            Ok(t) => leader_time = Some(t),
            Err(e) => notes.push(format!("leader time: {e}")),
        }
        match bounds::prism_tx_time(0.0, q.eps, q.m, &d, q.alpha, q.delta_net) {
            Ok(c) => {
                tx_depth = Some(c.k);
                tx_time = Some(c.t);
            }
            Err(e) => notes.push(format!("transaction time: {e}")),
        }
    }
    Ok(BoundsReport {
        query: *q,
        admissibility_lhs: adm.lhs,
        admissible: adm.ok,
        good_event_bound: ev.good.value,
        typical_event_bound: ev.typical.value,
        depth_bound: bounds::depth_bound(&d, q.alpha, q.k, q.delta_net),
        depth_bound_quoted_mu: bounds::depth_bound(&quoted, q.alpha, q.k, q.delta_net),
        quoted_mu: QUOTED_MU,
        quoted_mu_reproduced,
        min_interval: bounds::min_interval(q.delta_net, q.delta_typ),
        min_depth: bounds::min_depth(q.alpha, q.delta_net, q.delta_typ),
        leader_time,
        tx_depth,
        tx_time,
        notes,
        derived: d,
    })
}

impl fmt::Display for BoundsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let q = &self.query;
        let d = &self.derived;
        let row = |f: &mut fmt::Formatter<'_>, name: &str, value: String| writeln!(f, "{name:<32} {value}");
        row(f, "alpha", format!("{}", q.alpha))?;
        row(f, "beta", format!("{}", q.beta))?;
        row(f, "delta_net", format!("{}", q.delta_net))?;
        row(f, "delta_typ", format!("{}", q.delta_typ))?;
        row(f, "g", format!("{:.9}", d.g))?;
        row(f, "eta", format!("{:.6}", d.eta))?;
        row(f, "mu", format!("{:.6}", d.mu))?;
        row(
            f,
            "mu (quoted)",
            format!("{} {}", self.quoted_mu, if self.quoted_mu_reproduced { "reproduced" } else { "UNREPRODUCED" }),
        )?;
        row(f, "growth coefficient", format!("{:.6}", d.growth_coeff))?;
        row(
            f,
            "admissibility lhs",
            format!(
                "{:.6} ({})",
                self.admissibility_lhs,
                if self.admissible { "> beta" } else { "<= beta, inadmissible" }
            ),
        )?;
        row(f, &format!("good event bound (t-s={})", q.interval), format!("{:.6e}", self.good_event_bound))?;
        row(f, &format!("typical event bound (t-s={})", q.interval), format!("{:.6e}", self.typical_event_bound))?;
        row(f, &format!("depth bound (k={})", q.k), format!("{:.6e}", self.depth_bound))?;
        row(f, "depth bound (quoted mu)", format!("{:.6e}", self.depth_bound_quoted_mu))?;
        row(f, "min interval", format!("{:.6}", self.min_interval))?;
        row(f, "min depth", format!("{:.6}", self.min_depth))?;
        if let Some(t) = self.leader_time {
            row(f, &format!("leader time - R_h (eps={})", q.eps), format!("{t:.6}"))?;
        }
        if let (Some(k), Some(t)) = (self.tx_depth, self.tx_time) {
            row(f, "tx depth k", format!("{k}"))?;
            row(f, "tx time - r", format!("{t:.6}"))?;
        }
        for n in &self.notes {
            writeln!(f, "note: {n}")?;
        }
        Ok(())
    }
}
