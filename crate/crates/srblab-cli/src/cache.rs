//! File cache for expensive intermediates (critical orbits, eigenpairs),
//! keyed by a hash of everything that determines the result. Location comes
//! from `SRBLAB_CACHE_DIR`, defaulting to `.srblab-cache` in the working
//! directory. Warm results are byte-identical to cold ones.

use std::path::PathBuf;

use anyhow::Result;
use sha2::{Digest, Sha256};

use srblab::map_family::{critical_orbit, CriticalOrbit, MapFamily};
use srblab::numeric::fmt_g17;
use srblab::tower::TowerSpec;
use srblab::transfer_op::{leading_eigenpair, EigenConfig, Eigenpair, LevelFn, TowerOperator};

fn cache_dir() -> PathBuf {
    std::env::var_os("SRBLAB_CACHE_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(".srblab-cache"))
}

fn key_path(parts: &[String]) -> Result<PathBuf> {
    let mut hasher = Sha256::new();
    for p in parts {
        hasher.update(p.as_bytes());
        hasher.update([0u8]);
    }
    let digest = hasher.finalize();
    let dir = cache_dir();
    std::fs::create_dir_all(&dir)?;
    Ok(dir.join(format!("{:x}.json", digest)))
}

pub fn cached_orbit(family: &MapFamily, family_id: &str, t: f64, n: usize) -> Result<CriticalOrbit> {
    let path = key_path(&[
        "orbit".into(),
        family_id.into(),
        fmt_g17(t),
        n.to_string(),
    ])?;
    if let Ok(text) = std::fs::read_to_string(&path) {
        if let Ok(orbit) = serde_json::from_str(&text) {
            return Ok(orbit);
        }
    }
    let orbit = critical_orbit(family, t, n)?;
    std::fs::write(&path, serde_json::to_string(&orbit)?)?;
    Ok(orbit)
}

#[derive(serde::Serialize, serde::Deserialize)]
struct StoredEigenpair {
    m: usize,
    kappa: f64,
    residual: f64,
    tau_m: f64,
    iterations: usize,
    lambda: f64,
    levels: Vec<LevelFn>,
}

pub fn cached_eigenpair(
    op: &TowerOperator,
    family_id: &str,
    t: f64,
    spec: &TowerSpec,
    lambda: f64,
    m: usize,
    tol: f64,
) -> Result<Eigenpair> {
    let path = key_path(&[
        "eigenpair".into(),
        family_id.into(),
        fmt_g17(t),
        fmt_g17(spec.delta),
        fmt_g17(spec.l_const),
        fmt_g17(spec.beta),
        spec.k_max.to_string(),
        fmt_g17(lambda),
        m.to_string(),
        fmt_g17(tol),
        format!("{}x{}", op.grid.level0_nodes, op.grid.level_nodes),
    ])?;
    if let Ok(text) = std::fs::read_to_string(&path) {
        if let Ok(stored) = serde_json::from_str::<StoredEigenpair>(&text) {
            return Ok(Eigenpair {
                m: stored.m,
                kappa: stored.kappa,
                residual: stored.residual,
                tau_m: stored.tau_m,
                iterations: stored.iterations,
                phi: srblab::transfer_op::TowerFunction {
                    lambda: stored.lambda,
                    levels: stored.levels,
                },
            });
        }
    }
    let pair = leading_eigenpair(
        op,
        m,
        &EigenConfig {
            tol,
            ..Default::default()
        },
    )?;
    let stored = StoredEigenpair {
        m: pair.m,
        kappa: pair.kappa,
        residual: pair.residual,
        tau_m: pair.tau_m,
        iterations: pair.iterations,
        lambda: pair.phi.lambda,
        levels: pair.phi.levels.clone(),
    };
    std::fs::write(&path, serde_json::to_string(&stored)?)?;
    Ok(pair)
}
