//! Small dense d x d matrices (d <= 3) for effective tensors.

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmallMat {
    pub d: usize,
    a: [[f64; 3]; 3],
}

impl SmallMat {
    pub fn zeros(d: usize) -> Self {
        SmallMat { d, a: [[0.0; 3]; 3] }
    }

    pub fn identity(d: usize) -> Self {
        let mut m = Self::zeros(d);
        for i in 0..d {
            m.a[i][i] = 1.0;
        }
        m
    }

    pub fn scaled_identity(d: usize, s: f64) -> Self {
        let mut m = Self::zeros(d);
        for i in 0..d {
            m.a[i][i] = s;
        }
        m
    }

    #[inline]
    pub fn get(&self, i: usize, k: usize) -> f64 {
        self.a[i][k]
    }

    #[inline]
    pub fn set(&mut self, i: usize, k: usize, v: f64) {
        self.a[i][k] = v;
    }

    pub fn add(&self, other: &SmallMat) -> SmallMat {
        let mut m = *self;
        for i in 0..self.d {
            for k in 0..self.d {
                m.a[i][k] += other.a[i][k];
            }
        }
        m
    }

    pub fn sub(&self, other: &SmallMat) -> SmallMat {
        let mut m = *self;
        for i in 0..self.d {
            for k in 0..self.d {
                m.a[i][k] -= other.a[i][k];
            }
        }
        m
    }

    pub fn scale(&self, s: f64) -> SmallMat {
        let mut m = *self;
        for i in 0..self.d {
            for k in 0..self.d {
                m.a[i][k] *= s;
            }
        }
        m
    }

    pub fn symmetrized(&self) -> SmallMat {
        let mut m = *self;
        for i in 0..self.d {
            for k in 0..self.d {
                m.a[i][k] = 0.5 * (self.a[i][k] + self.a[k][i]);
            }
        }
        m
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        let mut v: f64 = 0.0;
        for i in 0..self.d {
            for k in 0..self.d {
                v = v.max(self.a[i][k].abs());
            }
        }
        v
    }

    pub fn asymmetry(&self) -> f64 {
        self.sub(&self.symmetrized()).max_abs() * 2.0
    }

    /// Eigenvalues of the symmetric part, ascending. Cyclic Jacobi; exact
    /// closed form would do for d = 2 but one routine covers both sizes.
    pub fn sym_eigenvalues(&self) -> Vec<f64> {
        let mut m = self.symmetrized();
        for _ in 0..64 {
            let mut off = 0.0f64;
            for i in 0..self.d {
                for k in (i + 1)..self.d {
                    off = off.max(m.a[i][k].abs());
                }
            }
            if off < 1e-15 * (1.0 + m.max_abs()) {
                break;
            }
            for p in 0..self.d {
                for q in (p + 1)..self.d {
                    if m.a[p][q].abs() < 1e-300 {
                        continue;
                    }
                    let theta = (m.a[q][q] - m.a[p][p]) / (2.0 * m.a[p][q]);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    let (app, aqq, apq) = (m.a[p][p], m.a[q][q], m.a[p][q]);
                    m.a[p][p] = c * c * app - 2.0 * s * c * apq + s * s * aqq;
                    m.a[q][q] = s * s * app + 2.0 * s * c * apq + c * c * aqq;
                    m.a[p][q] = 0.0;
                    m.a[q][p] = 0.0;
                    for r in 0..self.d {
                        if r != p && r != q {
                            let (arp, arq) = (m.a[r][p], m.a[r][q]);
                            m.a[r][p] = c * arp - s * arq;
                            m.a[p][r] = m.a[r][p];
                            m.a[r][q] = s * arp + c * arq;
                            m.a[q][r] = m.a[r][q];
                        }
                    }
                }
            }
        }
        let mut eig: Vec<f64> = (0..self.d).map(|i| m.a[i][i]).collect();
        eig.sort_by(|a, b| a.partial_cmp(b).unwrap());
        eig
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.d).map(|i| self.a[i][..self.d].to_vec()).collect()
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let d = rows.len();
        let mut m = Self::zeros(d);
        for (i, row) in rows.iter().enumerate() {
            for (k, v) in row.iter().enumerate() {
                m.a[i][k] = *v;
            }
        }
        m
    }
}
