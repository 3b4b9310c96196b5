//! Report records and atomic file output.

use std::io::Write;
use std::path::Path;

use serde::Serialize;
use tempfile::NamedTempFile;

use statusnet_core::compstat::{CompStatReport, IncomePairCheck, SignRow, SwapReport};
use statusnet_core::equilibrium::EquilibriumSolution;
use statusnet_core::inequality::InequalityRow;
use statusnet_core::net::{AgentId, HomophilyDelta, Identity};
use statusnet_core::AltEquilibrium;

use crate::CliError;

/// Writes through a temporary file in the target directory and renames it
/// into place, so readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let io = |e: std::io::Error| CliError::Io(format!("{}: {e}", path.display()));
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir).map_err(io)?;
    let mut tmp = NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(bytes).map_err(io)?;
    tmp.as_file().sync_all().map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

pub fn to_csv<T: Serialize>(rows: &[T]) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| CliError::Io(e.to_string()))?;
    }
    w.into_inner().map_err(|e| CliError::Io(e.to_string()))
}

pub fn to_json<T: Serialize + ?Sized>(value: &T) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s.into_bytes()
}

/// One agent of a solved equilibrium.
#[derive(Debug, Serialize)]
pub struct AgentRecord {
    pub agent_id: AgentId,
    pub identity: Identity,
    pub x: f64,
    #[serde(rename = "R")]
    pub r: f64,
}

pub fn solution_rows(sol: &EquilibriumSolution, identities: &[Identity]) -> Vec<AgentRecord> {
    (0..sol.x.len()).map(|j| AgentRecord { agent_id: j, identity: identities[j], x: sol.x[j], r: sol.r[j] }).collect()
}

pub fn alt_rows(sol: &AltEquilibrium, identities: &[Identity]) -> Vec<AgentRecord> {
    (0..sol.x.len()).map(|j| AgentRecord { agent_id: j, identity: identities[j], x: sol.x[j], r: sol.r[j] }).collect()
}

#[derive(Debug, Serialize)]
pub struct CompStatRecord {
    pub experiment_id: String,
    pub target: AgentId,
    pub shocked: AgentId,
    pub same_identity: bool,
    pub total: f64,
    pub own_channel: f64,
    pub group_channel: f64,
    pub analytic_total: f64,
    pub relative_gap: f64,
    pub ok: bool,
}

/// Decomposition must match finite differences to this relative gap.
pub const DECOMPOSITION_TOL: f64 = 1e-5;

impl CompStatRecord {
    pub fn new(r: &CompStatReport, same_identity: bool) -> Self {
        let gap = r.relative_gap();
        let ok = gap <= DECOMPOSITION_TOL && (same_identity || r.total > 0.0);
        Self {
            experiment_id: "compstat".into(),
            target: r.target,
            shocked: r.shocked,
            same_identity,
            total: r.total,
            own_channel: r.own_channel,
            group_channel: r.group_channel,
            analytic_total: r.analytic_total,
            relative_gap: gap,
            ok,
        }
    }
}

/// A sign row with the inequality columns appended. Flattened by hand
/// because the CSV writer cannot serialize nested maps.
#[derive(Debug, Serialize)]
pub struct InequalityRecord {
    pub experiment_id: String,
    pub agent_id: AgentId,
    pub identity: Identity,
    pub community: usize,
    pub baseline_x: f64,
    pub shocked_x: f64,
    pub delta: f64,
    pub expected_sign: String,
    pub sign_ok: bool,
    pub density: f64,
    pub phi_before: f64,
    pub phi_after: f64,
    #[serde(rename = "X_before")]
    pub x_before: f64,
    #[serde(rename = "X_after")]
    pub x_after: f64,
}

impl From<&InequalityRow> for InequalityRecord {
    fn from(r: &InequalityRow) -> Self {
        let s: &SignRow = &r.sign;
        Self {
            experiment_id: s.experiment_id.clone(),
            agent_id: s.agent_id,
            identity: s.identity,
            community: s.community,
            baseline_x: s.baseline_x,
            shocked_x: s.shocked_x,
            delta: s.delta,
            expected_sign: s.expected_sign.to_string(),
            sign_ok: s.sign_ok,
            density: r.density,
            phi_before: r.phi_before,
            phi_after: r.phi_after,
            x_before: r.x_before,
            x_after: r.x_after,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct IncomePairRecord {
    pub experiment_id: String,
    pub poorer: AgentId,
    pub richer: AgentId,
    pub impact_poorer: f64,
    pub impact_richer: f64,
    pub ok: bool,
}

impl IncomePairRecord {
    pub fn new(id: &str, p: &IncomePairCheck) -> Self {
        Self {
            experiment_id: id.to_string(),
            poorer: p.poorer,
            richer: p.richer,
            impact_poorer: p.impact_poorer,
            impact_richer: p.impact_richer,
            ok: p.ok,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct SwapRecord {
    pub j: AgentId,
    pub k: AgentId,
    pub l: AgentId,
    pub delta: String,
    pub masked_changed: bool,
    /// Change in the swapping group's mean centrality.
    pub d_mean_centrality: f64,
    pub min_dc: f64,
    pub max_dc: f64,
    pub centrality_ok: bool,
    pub consumption_ok: bool,
}

impl From<&SwapReport> for SwapRecord {
    fn from(r: &SwapReport) -> Self {
        let group_dc = r.group.iter().map(|&m| r.dc[m]);
        let min_dc = group_dc.clone().fold(f64::INFINITY, f64::min);
        let max_dc = group_dc.clone().fold(f64::NEG_INFINITY, f64::max);
        let d_mean = group_dc.sum::<f64>() / r.group.len() as f64;
        Self {
            j: r.swap.0,
            k: r.swap.1,
            l: r.swap.2,
            delta: match r.delta {
                HomophilyDelta::Raising => "raising",
                HomophilyDelta::Lowering => "lowering",
                HomophilyDelta::Neutral => "neutral",
            }
            .into(),
            masked_changed: r.masked_changed,
            d_mean_centrality: d_mean,
            min_dc,
            max_dc,
            centrality_ok: r.centrality_ok,
            consumption_ok: r.consumption_ok,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atomic_write_replaces_contents() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sub").join("a.txt");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(std::fs::read(&p).unwrap(), b"two");
        assert_eq!(std::fs::read_dir(p.parent().unwrap()).unwrap().count(), 1);
    }

    #[test]
    fn csv_has_headers() {
        let rows = vec![AgentRecord { agent_id: 0, identity: Identity::A, x: 0.6, r: 0.3 }];
        let text = String::from_utf8(to_csv(&rows).unwrap()).unwrap();
        assert_eq!(text, "agent_id,identity,x,R\n0,A,0.6,0.3\n");
    }
}
