//! Semidefinite formulation of the barycenter, exported in SDPA sparse
//! format.
//!
//! The program is
//!
//! ```text
//! minimize   tr Σ* − 2 Σᵢ pᵢ tr Sᵢ
//! subject to [[Σᵢ, Sᵢ], [Sᵢᵀ, Σ*]] ⪰ 0   for every atom i
//! ```
//!
//! written in SDPA primal form `min cᵀx` s.t. `Σᵥ Fᵥ xᵥ − F₀ ⪰ 0`.
//! Variables are ordered as the upper triangle of `Σ*` (`(j, k)`, `j ≤ k`,
//! row by row), then `S₁, …, S_k`, each `d²` entries row-major. There is one
//! `2d × 2d` block per atom and `F₀ = −[[Σᵢ, 0], [0, 0]]` in block `i`.
//! At the optimum `Σ*` is the barycenter and the objective equals
//! `2 F(Σ*) − Σᵢ pᵢ tr Σᵢ`.

use std::fmt::Write as _;
use std::io::Write;

use nalgebra::DMatrix;

use crate::distribution::DiscreteDistribution;
use crate::error::{check_dim, Result};
use crate::geometry::{sym_eigen, transport_map, SpdMatrix};

/// One nonzero upper-triangular entry: matrix index (0 = `F₀`), block,
/// row and column, all 1-based as in the file.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Entry {
    pub matrix: usize,
    pub block: usize,
    pub row: usize,
    pub col: usize,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SdpProblem {
    pub dim: usize,
    pub atoms: usize,
    pub c: Vec<f64>,
    pub entries: Vec<Entry>,
}

/// Number of free entries of `Σ*`.
pub fn sym_vars(d: usize) -> usize {
    d * (d + 1) / 2
}

/// Variable index (1-based) of `Σ*[j][k]`, `j ≤ k`, 0-based inputs.
pub fn sigma_var(d: usize, j: usize, k: usize) -> usize {
    let (j, k) = if j <= k { (j, k) } else { (k, j) };
    // entries in rows above j, then the offset within row j
    let before: usize = (0..j).map(|r| d - r).sum();
    before + (k - j) + 1
}

/// Variable index (1-based) of `Sᵢ[j][k]`, 0-based inputs.
pub fn s_var(d: usize, atom: usize, j: usize, k: usize) -> usize {
    sym_vars(d) + atom * d * d + j * d + k + 1
}

impl SdpProblem {
    pub fn build(p: &DiscreteDistribution) -> Self {
        let d = p.dim();
        let n = p.len();
        let mut c = vec![0.0; sym_vars(d) + n * d * d];
        for j in 0..d {
            c[sigma_var(d, j, j) - 1] = 1.0;
        }
        let mut entries = Vec::new();
        for (i, w) in p.weights().iter().enumerate() {
            let block = i + 1;
            let cov = p.covariance(i).matrix();
            for j in 0..d {
                for k in j..d {
                    if cov[(j, k)] != 0.0 {
                        entries.push(Entry { matrix: 0, block, row: j + 1, col: k + 1, value: -cov[(j, k)] });
                    }
                }
            }
            for j in 0..d {
                for k in j..d {
                    entries.push(Entry {
                        matrix: sigma_var(d, j, k),
                        block,
                        row: d + j + 1,
                        col: d + k + 1,
                        value: 1.0,
                    });
                }
            }
            for j in 0..d {
                c[s_var(d, i, j, j) - 1] = -2.0 * w;
                for k in 0..d {
                    entries.push(Entry {
                        matrix: s_var(d, i, j, k),
                        block,
                        row: j + 1,
                        col: d + k + 1,
                        value: 1.0,
                    });
                }
            }
        }
        Self { dim: d, atoms: n, c, entries }
    }

    pub fn num_vars(&self) -> usize {
        self.c.len()
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        self.c.iter().zip(x).map(|(c, x)| c * x).sum()
    }

    /// `Σᵥ Fᵥ xᵥ − F₀` for every block.
    pub fn slack_blocks(&self, x: &[f64]) -> Vec<DMatrix<f64>> {
        let size = 2 * self.dim;
        let mut blocks = vec![DMatrix::zeros(size, size); self.atoms];
        for e in &self.entries {
            let v = if e.matrix == 0 { -e.value } else { e.value * x[e.matrix - 1] };
            let b = &mut blocks[e.block - 1];
            b[(e.row - 1, e.col - 1)] += v;
            if e.row != e.col {
                b[(e.col - 1, e.row - 1)] += v;
            }
        }
        blocks
    }

    /// Smallest eigenvalue over all slack blocks; nonnegative when `x` is
    /// feasible.
    pub fn min_slack_eigenvalue(&self, x: &[f64]) -> Result<f64> {
        let mut lo = f64::INFINITY;
        for b in self.slack_blocks(x) {
            let (values, _) = sym_eigen(&b, "sdp slack block")?;
            lo = lo.min(values[0]);
        }
        Ok(lo)
    }

    pub fn to_sdpa(&self) -> String {
        let mut out = String::new();
        let size = 2 * self.dim;
        writeln!(out, "* Bures-Wasserstein barycenter: d = {}, atoms = {}", self.dim, self.atoms).unwrap();
        writeln!(out, "{}", self.num_vars()).unwrap();
        writeln!(out, "{}", self.atoms).unwrap();
        let sizes: Vec<String> = (0..self.atoms).map(|_| size.to_string()).collect();
        writeln!(out, "{}", sizes.join(" ")).unwrap();
        let c: Vec<String> = self.c.iter().map(|v| v.to_string()).collect();
        writeln!(out, "{}", c.join(" ")).unwrap();
        let mut entries = self.entries.clone();
        entries.sort_by_key(|e| (e.matrix, e.block, e.row, e.col));
        for e in entries {
            writeln!(out, "{} {} {} {} {}", e.matrix, e.block, e.row, e.col, e.value).unwrap();
        }
        out
    }

    pub fn write_sdpa(&self, w: &mut impl Write) -> Result<()> {
        w.write_all(self.to_sdpa().as_bytes())?;
        Ok(())
    }
}

/// Feasible point built from a candidate `Σ*`: `Sᵢ = T(Σ* → Σᵢ) Σ*`, which
/// makes every block's Schur complement vanish.
pub fn plug_in_solution(p: &DiscreteDistribution, sigma_star: &SpdMatrix) -> Result<Vec<f64>> {
    let d = p.dim();
    check_dim(d, sigma_star.dim())?;
    let mut x = vec![0.0; sym_vars(d) + p.len() * d * d];
    for j in 0..d {
        for k in j..d {
            x[sigma_var(d, j, k) - 1] = sigma_star.matrix()[(j, k)];
        }
    }
    for i in 0..p.len() {
        let t = transport_map(sigma_star, p.covariance(i))?;
        let s = t.matrix() * sigma_star.matrix();
        for j in 0..d {
            for k in 0..d {
                x[s_var(d, i, j, k) - 1] = s[(j, k)];
            }
        }
    }
    Ok(x)
}
