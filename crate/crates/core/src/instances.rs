//! Sherrington–Kirkpatrick disorder realizations.
//!
//! An instance holds a symmetric coupling matrix `J` with zero diagonal and a
//! field vector `h`, and defines the diagonal problem energy
//!
//! ```text
//! E(s) = −½ Σ_{i≠j} J_ij s_i s_j − Σ_i h_i s_i ,   s_i = ±1
//! ```
//!
//! Spin `i` (0-based here, qubit `i+1` elsewhere) is stored in bit
//! `n−1−i` of a basis index; a clear bit is `s_i = +1`.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Identifier of the generator used by [`sample_sk`]: ChaCha20 seeded from a
/// `u64`, uniform doubles mapped through the Box–Muller transform.
pub const RNG_ID: &str = "chacha20-boxmuller-v1";

/// Largest size accepted by [`brute_force_ground`].
pub const MAX_ENUMERATION: usize = 24;

/// Energies closer than this count as degenerate.
pub const DEGENERACY_TOL: f64 = 1e-9;

/// Standard-normal stream: ChaCha20 uniforms through Box–Muller, both
/// outputs of each pair used in order.
#[derive(Clone, Debug)]
pub struct NormalStream {
    rng: ChaCha20Rng,
    spare: Option<f64>,
}

impl NormalStream {
    pub fn new(seed: u64) -> Self {
        Self { rng: ChaCha20Rng::seed_from_u64(seed), spare: None }
    }

    pub fn next_normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        // u1 in (0, 1] keeps the logarithm finite.
        let u1 = 1.0 - self.rng.random::<f64>();
        let u2 = self.rng.random::<f64>();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = std::f64::consts::TAU * u2;
        self.spare = Some(r * theta.sin());
        r * theta.cos()
    }
}

/// One disorder realization.
#[derive(Clone, Debug, PartialEq)]
pub struct SkInstance {
    n: usize,
    couplings: Vec<f64>,
    fields: Vec<f64>,
    seed: u64,
    rng_id: String,
}

impl SkInstance {
    /// Builds an instance from a full row-major `n × n` coupling matrix.
    pub fn new(couplings: Vec<f64>, fields: Vec<f64>, seed: u64, rng_id: impl Into<String>) -> Result<Self> {
        let n = fields.len();
        if n == 0 {
            return Err(Error::InvalidParameter { name: "n", reason: "instance needs at least one spin".into() });
        }
        if couplings.len() != n * n {
            return Err(Error::DimensionMismatch { expected: n * n, actual: couplings.len() });
        }
        for i in 0..n {
            if couplings[i * n + i] != 0.0 {
                return Err(Error::InvalidParameter { name: "J", reason: format!("nonzero diagonal J[{i}][{i}]") });
            }
            for j in 0..i {
                if couplings[i * n + j] != couplings[j * n + i] {
                    return Err(Error::InvalidParameter { name: "J", reason: format!("asymmetric at ({j}, {i})") });
                }
            }
        }
        Ok(Self { n, couplings, fields, seed, rng_id: rng_id.into() })
    }

    /// Builds an instance from the strict upper triangle, row-major.
    pub fn from_upper(n: usize, upper: &[f64], fields: Vec<f64>, seed: u64, rng_id: impl Into<String>) -> Result<Self> {
        if upper.len() != n * n.saturating_sub(1) / 2 {
            return Err(Error::DimensionMismatch { expected: n * n.saturating_sub(1) / 2, actual: upper.len() });
        }
        if fields.len() != n {
            return Err(Error::DimensionMismatch { expected: n, actual: fields.len() });
        }
        let mut couplings = vec![0.0; n * n];
        let mut it = upper.iter();
        for i in 0..n {
            for j in i + 1..n {
                let v = *it.next().unwrap();
                couplings[i * n + j] = v;
                couplings[j * n + i] = v;
            }
        }
        Self::new(couplings, fields, seed, rng_id)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn coupling(&self, i: usize, j: usize) -> f64 {
        self.couplings[i * self.n + j]
    }

    /// Row-major `n × n` coupling matrix.
    pub fn couplings(&self) -> &[f64] {
        &self.couplings
    }

    pub fn fields(&self) -> &[f64] {
        &self.fields
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn rng_id(&self) -> &str {
        &self.rng_id
    }

    /// Strict upper triangle of `J`, row-major.
    pub fn upper_triangle(&self) -> Vec<f64> {
        let n = self.n;
        (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).map(|(i, j)| self.coupling(i, j)).collect()
    }

    /// Copy with all fields negated.
    pub fn with_negated_fields(&self) -> Self {
        Self { fields: self.fields.iter().map(|h| -h).collect(), ..self.clone() }
    }

    /// Problem energy of a ±1 configuration.
    pub fn energy(&self, spins: &[i8]) -> f64 {
        assert_eq!(spins.len(), self.n);
        let mut e = 0.0;
        for i in 0..self.n {
            let si = f64::from(spins[i]);
            for j in i + 1..self.n {
                e -= self.coupling(i, j) * si * f64::from(spins[j]);
            }
            e -= self.fields[i] * si;
        }
        e
    }

    /// Problem energy of a computational basis index.
    pub fn energy_of_index(&self, index: usize) -> f64 {
        self.energy(&spins_of_index(index, self.n))
    }
}

/// ±1 configuration encoded by `index` (qubit 1 = most significant bit).
pub fn spins_of_index(index: usize, n: usize) -> Vec<i8> {
    (0..n).map(|i| if index >> (n - 1 - i) & 1 == 0 { 1 } else { -1 }).collect()
}

pub fn index_of_spins(spins: &[i8]) -> usize {
    let n = spins.len();
    spins.iter().enumerate().fold(0, |acc, (i, &s)| if s < 0 { acc | 1 << (n - 1 - i) } else { acc })
}

/// Draws a realization with independent standard-normal `J_ij` (i<j,
/// row-major) followed by `h_i`.
pub fn sample_sk(n: usize, seed: u64) -> Result<SkInstance> {
    if n == 0 {
        return Err(Error::InvalidParameter { name: "n", reason: "instance needs at least one spin".into() });
    }
    let mut normals = NormalStream::new(seed);
    let upper: Vec<f64> = (0..n * (n - 1) / 2).map(|_| normals.next_normal()).collect();
    let fields = (0..n).map(|_| normals.next_normal()).collect();
    SkInstance::from_upper(n, &upper, fields, seed, RNG_ID)
}

/// Exact minimizer of the problem energy.
#[derive(Clone, Debug, PartialEq)]
pub struct GroundSolution {
    pub energy: f64,
    pub configuration: Vec<i8>,
    /// Basis index of `configuration`.
    pub index: usize,
    /// Basis index of the runner-up configuration.
    pub second_index: usize,
    pub second_energy: f64,
    /// The two lowest energies differ by less than [`DEGENERACY_TOL`].
    pub degenerate: bool,
}

impl GroundSolution {
    /// Basis indices spanning the ground space used for fidelities: the
    /// minimizer, plus the runner-up when degenerate.
    pub fn ground_indices(&self) -> Vec<usize> {
        if self.degenerate {
            let mut v = vec![self.index, self.second_index];
            v.sort_unstable();
            v
        } else {
            vec![self.index]
        }
    }
}

#[derive(Clone, Copy)]
struct Candidate {
    energy: f64,
    index: usize,
}

fn better(a: Candidate, b: Candidate) -> bool {
    // Incremental energies carry roundoff; near-ties go to the lower index.
    let tol = 1e-12 * (1.0 + a.energy.abs().max(b.energy.abs()));
    if (a.energy - b.energy).abs() <= tol {
        a.index < b.index
    } else {
        a.energy < b.energy
    }
}

/// Exhaustive minimization over all `2^n` configurations by Gray-code walk.
pub fn brute_force_ground(instance: &SkInstance) -> Result<GroundSolution> {
    let n = instance.n();
    if n > MAX_ENUMERATION {
        return Err(Error::EnumerationBound { n, max: MAX_ENUMERATION });
    }
    let mut spins = vec![1i8; n];
    let mut local: Vec<f64> = (0..n)
        .map(|i| (0..n).map(|j| instance.coupling(i, j)).sum::<f64>() + instance.fields()[i])
        .collect();
    let mut energy = instance.energy(&spins);
    let mut index = 0usize;
    let mut best = Candidate { energy, index };
    let mut second = Candidate { energy: f64::INFINITY, index: usize::MAX };
    for k in 1u64..(1u64 << n) {
        let site = k.trailing_zeros() as usize;
        let s = f64::from(spins[site]);
        energy += 2.0 * s * local[site];
        for (j, l) in local.iter_mut().enumerate() {
            if j != site {
                *l -= 2.0 * s * instance.coupling(j, site);
            }
        }
        spins[site] = -spins[site];
        index ^= 1 << (n - 1 - site);
        let cand = Candidate { energy, index };
        if better(cand, best) {
            second = best;
            best = cand;
        } else if better(cand, second) {
            second = cand;
        }
    }
    let energy = instance.energy_of_index(best.index);
    let (second_index, second_energy) = if n == 0 || second.index == usize::MAX {
        (best.index, f64::INFINITY)
    } else {
        (second.index, instance.energy_of_index(second.index))
    };
    Ok(GroundSolution {
        energy,
        configuration: spins_of_index(best.index, n),
        index: best.index,
        second_index,
        second_energy,
        degenerate: (second_energy - energy).abs() < DEGENERACY_TOL,
    })
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum CouplingRepr {
    Upper(Vec<f64>),
    Full(Vec<Vec<f64>>),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInstanceFile {
    n: usize,
    seed: u64,
    rng_id: String,
    #[serde(rename = "J")]
    couplings: CouplingRepr,
    h: Vec<f64>,
    ground_energy: Option<f64>,
}

#[derive(Debug, Serialize)]
struct InstanceFileOut<'a> {
    n: usize,
    seed: u64,
    rng_id: &'a str,
    #[serde(rename = "J")]
    couplings: Vec<f64>,
    h: &'a [f64],
    #[serde(skip_serializing_if = "Option::is_none")]
    ground_energy: Option<f64>,
}

/// Parsed instance file: the instance plus an optional recorded ground energy.
#[derive(Clone, Debug, PartialEq)]
pub struct InstanceFile {
    pub instance: SkInstance,
    pub ground_energy: Option<f64>,
}

/// Serializes an instance (`J` as the upper triangle, row-major).
pub fn instance_to_toml(instance: &SkInstance, ground_energy: Option<f64>) -> String {
    let out = InstanceFileOut {
        n: instance.n(),
        seed: instance.seed(),
        rng_id: instance.rng_id(),
        couplings: instance.upper_triangle(),
        h: instance.fields(),
        ground_energy,
    };
    toml::to_string(&out).expect("instance serialization cannot fail")
}

/// Parses an instance document. `J` may be the upper triangle or a full
/// square matrix; the latter must be symmetric with zero diagonal.
pub fn instance_from_toml(text: &str) -> std::result::Result<InstanceFile, String> {
    let raw: RawInstanceFile = toml::from_str(text).map_err(|e| e.to_string())?;
    if raw.h.len() != raw.n {
        return Err(format!("`h` has {} entries, expected n = {}", raw.h.len(), raw.n));
    }
    let instance = match raw.couplings {
        CouplingRepr::Upper(upper) => {
            SkInstance::from_upper(raw.n, &upper, raw.h, raw.seed, raw.rng_id).map_err(|e| format!("`J`: {e}"))?
        }
        CouplingRepr::Full(rows) => {
            if rows.len() != raw.n || rows.iter().any(|r| r.len() != raw.n) {
                return Err(format!("`J` must be {n} × {n}", n = raw.n));
            }
            SkInstance::new(rows.concat(), raw.h, raw.seed, raw.rng_id).map_err(|e| format!("`J`: {e}"))?
        }
    };
    Ok(InstanceFile { instance, ground_energy: raw.ground_energy })
}

pub fn save_instance(path: impl AsRef<Path>, instance: &SkInstance, ground_energy: Option<f64>) -> Result<()> {
    fs::write(path, instance_to_toml(instance, ground_energy))?;
    Ok(())
}

pub fn load_instance_file(path: impl AsRef<Path>) -> Result<InstanceFile> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)
        .map_err(|e| Error::InstanceFile { path: path.to_path_buf(), reason: e.to_string() })?;
    instance_from_toml(&text).map_err(|reason| Error::InstanceFile { path: path.to_path_buf(), reason })
}

pub fn load_instance(path: impl AsRef<Path>) -> Result<SkInstance> {
    Ok(load_instance_file(path)?.instance)
}
