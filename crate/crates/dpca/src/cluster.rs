//! The simulated m-machine environment: local datasets, cached local
//! covariances, the communication-round ledger and the distributed matvec
//! primitive every iterative algorithm consumes.
//!
//! Round-accounting convention: a coordinator broadcast of one vector costs
//! one round; a gather of one vector (or one local eigenvector) from all
//! machines costs one round. A full distributed matvec is therefore a
//! broadcast plus a gather, two rounds.

use std::sync::OnceLock;

use crate::distributions::DistributionSpec;
use crate::error::{Error, Result};
use crate::linalg::{sym_eig, SpectralInfo, SymMatrix, Vector};
use crate::rng::SeedSpec;

/// Memory guard: refuse clusters whose retained raw samples would exceed this
/// many f64 entries (~1.6 GB).
const MAX_RETAINED_ELEMENTS: usize = 200_000_000;

#[derive(Clone, Debug)]
pub struct MachineState {
    pub machine_id: usize,
    /// Raw samples, retained only when requested (hot-potato SGD needs them).
    pub samples: Option<Vec<Vector>>,
    /// Local empirical covariance (1/n) sum x x^T.
    pub local_cov: SymMatrix,
    spectrum: OnceLock<SpectralInfo>,
}

impl MachineState {
    /// Lazily computed spectrum of the local covariance.
    pub fn local_spectrum(&self) -> Result<&SpectralInfo> {
        if let Some(s) = self.spectrum.get() {
            return Ok(s);
        }
        let info = sym_eig(&self.local_cov, 0.0)?;
        let _ = self.spectrum.set(info);
        Ok(self.spectrum.get().unwrap())
    }
}

/// How a machine resolves the sign ambiguity of its local eigenvector.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SignPolicy {
    /// Flip with independent probability 1/2, seeded.
    UnbiasedRandom(u64),
    /// Largest-magnitude coordinate positive (the linalg convention).
    Canonical,
}

#[derive(Clone, Debug)]
pub struct ClusterState {
    pub machines: Vec<MachineState>,
    pub d: usize,
    pub n: usize,
    pub round_counter: u64,
    pub matvec_counter: u64,
}

/// Draw m local datasets of n samples each and cache the local covariances.
pub fn load_cluster(
    spec: &DistributionSpec,
    m: usize,
    n: usize,
    master_seed: u64,
    replicate: u64,
    retain_samples: bool,
) -> Result<ClusterState> {
    if m < 1 || n < 1 {
        return Err(Error::Parameter("need m >= 1 and n >= 1".into()));
    }
    if retain_samples && m * n * spec.d > MAX_RETAINED_ELEMENTS {
        return Err(Error::ResourceBudget(format!(
            "m*n*d = {} retained elements exceeds budget {}",
            m * n * spec.d,
            MAX_RETAINED_ELEMENTS
        )));
    }
    let machines = (0..m)
        .map(|i| {
            let mut rng = SeedSpec::new(master_seed, i as u64, replicate).stream();
            let mut cov = SymMatrix::zeros(spec.d);
            let mut samples = retain_samples.then(|| Vec::with_capacity(n));
            for _ in 0..n {
                let x = spec.sample_one(&mut rng);
                cov.add_outer(&x, 1.0 / n as f64);
                if let Some(store) = samples.as_mut() {
                    store.push(x);
                }
            }
            MachineState {
                machine_id: i,
                samples,
                local_cov: cov,
                spectrum: OnceLock::new(),
            }
        })
        .collect();
    Ok(ClusterState {
        machines,
        d: spec.d,
        n,
        round_counter: 0,
        matvec_counter: 0,
    })
}

/// Build a one-machine cluster around a known covariance matrix. Used to
/// inject exact test instances into the iterative solvers.
pub fn cluster_from_matrix(cov: SymMatrix) -> ClusterState {
    let d = cov.dim();
    ClusterState {
        machines: vec![MachineState {
            machine_id: 0,
            samples: None,
            local_cov: cov,
            spectrum: OnceLock::new(),
        }],
        d,
        n: 1,
        round_counter: 0,
        matvec_counter: 0,
    }
}

impl ClusterState {
    pub fn m(&self) -> usize {
        self.machines.len()
    }

    /// Coordinator broadcast of one vector: one round.
    pub fn broadcast(&mut self) {
        self.round_counter += 1;
    }

    /// Gather of one vector from every machine: one round.
    pub fn gather(&mut self) {
        self.round_counter += 1;
    }

    /// X_hat v = (1/m) sum_i X_hat_i v, summed in ascending machine order.
    /// Counts the gather round; callers broadcast the input themselves.
    pub fn distributed_matvec(&mut self, v: &Vector) -> Result<Vector> {
        if v.dim() != self.d {
            return Err(Error::DimensionMismatch(format!(
                "matvec input dim {} vs cluster dim {}",
                v.dim(),
                self.d
            )));
        }
        let mut acc = Vector::zeros(self.d);
        for machine in &self.machines {
            acc.add_scaled(1.0, &machine.local_cov.matvec(v));
        }
        let out = acc.scaled(1.0 / self.m() as f64);
        self.gather();
        self.matvec_counter += 1;
        Ok(out)
    }

    /// Broadcast + matvec: the two-round primitive of the iterative methods.
    pub fn broadcast_matvec(&mut self, v: &Vector) -> Result<Vector> {
        self.broadcast();
        self.distributed_matvec(v)
    }

    /// Exact average of the local covariances. Oracle / test use only; does
    /// not touch the ledger and is not a distributed operation.
    pub fn pooled_covariance(&self) -> SymMatrix {
        let mut acc = SymMatrix::zeros(self.d);
        for machine in &self.machines {
            acc = acc.add(&machine.local_cov);
        }
        acc.scaled(1.0 / self.m() as f64)
    }

    /// Unit leading eigenvector of one machine's local covariance, sign per
    /// policy. Pure local computation; the gather is accounted separately.
    pub fn local_erm(&self, machine_index: usize, policy: SignPolicy) -> Result<Vector> {
        let machine = &self.machines[machine_index];
        let info = machine.local_spectrum()?;
        let scale = info.lambda1.abs().max(1.0);
        if info.gap <= 1e-12 * scale {
            return Err(Error::Degenerate(format!(
                "machine {machine_index} has zero local eigengap"
            )));
        }
        let v = info.v1.clone();
        Ok(match policy {
            SignPolicy::Canonical => v,
            SignPolicy::UnbiasedRandom(seed) => {
                let mut rng =
                    SeedSpec::new(seed ^ 0xE120_FC15_ACB1_7F3B, machine_index as u64, 0).stream();
                if rng.next_sign() < 0.0 {
                    v.scaled(-1.0)
                } else {
                    v
                }
            }
        })
    }

    /// Gather every machine's local ERM vector: the one-shot round.
    pub fn gather_local_erms(&mut self, policy: SignPolicy) -> Result<Vec<Vector>> {
        let vs = (0..self.m())
            .map(|i| self.local_erm(i, policy))
            .collect::<Result<Vec<_>>>()?;
        self.gather();
        Ok(vs)
    }

    /// Hot-potato hand-off from one machine to the next: one round each.
    pub fn hand_off(&mut self) {
        self.round_counter += 1;
    }

    pub fn ledger(&self) -> (u64, u64) {
        (self.round_counter, self.matvec_counter)
    }
}
