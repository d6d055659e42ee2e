use std::path::Path;

use ndarray::{Array2, Array3};
use serde::{Deserialize, Serialize};

use crate::types::{Mdp, MdpError};

/// On-disk shape of an MDP. Costs are `n_states x n_actions` row-major
/// nested lists; transitions are indexed `[state][action][next_state]`.
#[derive(Debug, Serialize, Deserialize)]
struct MdpFile {
    n_states: usize,
    n_actions: usize,
    gamma: f64,
    c_max: f64,
    cost: Vec<Vec<f64>>,
    transition: Vec<Vec<Vec<f64>>>,
}

fn mdp_from_file(raw: MdpFile) -> Result<Mdp, MdpError> {
    let (n, m) = (raw.n_states, raw.n_actions);
    if raw.cost.len() != n {
        return Err(MdpError::invalid(
            "cost",
            format!("expected {n} rows, got {}", raw.cost.len()),
        ));
    }
    for (s, row) in raw.cost.iter().enumerate() {
        if row.len() != m {
            return Err(MdpError::invalid(
                format!("cost[{s}]"),
                format!("expected {m} entries, got {}", row.len()),
            ));
        }
    }
    if raw.transition.len() != n {
        return Err(MdpError::invalid(
            "transition",
            format!("expected {n} state blocks, got {}", raw.transition.len()),
        ));
    }
    for (s, block) in raw.transition.iter().enumerate() {
        if block.len() != m {
            return Err(MdpError::invalid(
                format!("transition[{s}]"),
                format!("expected {m} action rows, got {}", block.len()),
            ));
        }
        for (a, row) in block.iter().enumerate() {
            if row.len() != n {
                return Err(MdpError::invalid(
                    format!("transition[{s}][{a}]"),
                    format!("expected {n} entries, got {}", row.len()),
                ));
            }
        }
    }
    let cost = Array2::from_shape_fn((n, m), |(s, a)| raw.cost[s][a]);
    let transition = Array3::from_shape_fn((n, m, n), |(s, a, t)| raw.transition[s][a][t]);
    Mdp::new(transition, cost, raw.gamma, raw.c_max)
}

fn mdp_into_file(mdp: &Mdp) -> MdpFile {
    let (n, m) = (mdp.n_states(), mdp.n_actions());
    MdpFile {
        n_states: n,
        n_actions: m,
        gamma: mdp.gamma(),
        c_max: mdp.c_max(),
        cost: (0..n)
            .map(|s| (0..m).map(|a| mdp.cost()[[s, a]]).collect())
            .collect(),
        transition: (0..n)
            .map(|s| {
                (0..m)
                    .map(|a| (0..n).map(|t| mdp.transition()[[s, a, t]]).collect())
                    .collect()
            })
            .collect(),
    }
}

/// Parses an MDP from a JSON string, validating shapes, stochasticity, and
/// parameter ranges with the offending path in any error.
pub fn parse_mdp_json(text: &str) -> Result<Mdp, MdpError> {
    let raw: MdpFile = serde_json::from_str(text)?;
    mdp_from_file(raw)
}

/// Reads an MDP from a JSON file; see [`parse_mdp_json`].
pub fn load_mdp_json(path: impl AsRef<Path>) -> Result<Mdp, MdpError> {
    let text = std::fs::read_to_string(path)?;
    parse_mdp_json(&text)
}

/// Serializes an MDP to a pretty-printed JSON string.
pub fn mdp_to_json(mdp: &Mdp) -> String {
    serde_json::to_string_pretty(&mdp_into_file(mdp)).expect("MDP serialization cannot fail")
}

/// Writes an MDP to a JSON file.
pub fn save_mdp_json(mdp: &Mdp, path: impl AsRef<Path>) -> Result<(), MdpError> {
    std::fs::write(path, mdp_to_json(mdp))?;
    Ok(())
}
