//! Index-based view of a [`Bqm`] with incremental single-flip energy updates.

use crate::qubo::{Assignment, Bqm, VarKey};

#[derive(Debug, Clone)]
pub(crate) struct Compiled {
    pub vars: Vec<VarKey>,
    pub linear: Vec<f64>,
    pub adj: Vec<Vec<(usize, f64)>>,
    pub offset: f64,
}

impl Compiled {
    pub fn new(bqm: &Bqm) -> Self {
        let vars: Vec<VarKey> = bqm.variables().copied().collect();
        let index = |v: &VarKey| vars.binary_search(v).expect("term on unknown variable");
        let mut linear = vec![0.0; vars.len()];
        for (v, w) in bqm.linear() {
            linear[index(v)] += w;
        }
        let mut adj = vec![Vec::new(); vars.len()];
        for ((a, b), w) in bqm.quadratic() {
            let (ia, ib) = (index(a), index(b));
            adj[ia].push((ib, *w));
            adj[ib].push((ia, *w));
        }
        for list in &mut adj {
            list.sort_by_key(|(j, _)| *j);
        }
        Compiled {
            vars,
            linear,
            adj,
            offset: bqm.offset(),
        }
    }

    pub fn len(&self) -> usize {
        self.vars.len()
    }

    pub fn energy(&self, x: &[u8]) -> f64 {
        let mut e = self.offset;
        for i in 0..self.len() {
            if x[i] == 1 {
                e += self.linear[i];
                for &(j, w) in &self.adj[i] {
                    if j > i && x[j] == 1 {
                        e += w;
                    }
                }
            }
        }
        e
    }

    /// Local fields `h_i = l_i + Σ_j Q_ij·x_j`.
    pub fn fields(&self, x: &[u8]) -> Vec<f64> {
        (0..self.len())
            .map(|i| {
                self.linear[i]
                    + self.adj[i]
                        .iter()
                        .filter(|(j, _)| x[*j] == 1)
                        .map(|(_, w)| w)
                        .sum::<f64>()
            })
            .collect()
    }

    pub fn assignment(&self, x: &[u8]) -> Assignment {
        self.vars.iter().zip(x).map(|(v, b)| (*v, *b == 1)).collect()
    }

    pub fn bits(&self, a: &Assignment) -> Vec<u8> {
        self.vars
            .iter()
            .map(|v| u8::from(a.get(v).unwrap_or(false)))
            .collect()
    }
}

/// Current assignment with cached local fields and energy.
#[derive(Debug, Clone)]
pub(crate) struct FlipState {
    pub x: Vec<u8>,
    pub field: Vec<f64>,
    pub energy: f64,
}

impl FlipState {
    pub fn new(model: &Compiled, x: Vec<u8>) -> Self {
        let field = model.fields(&x);
        let energy = model.energy(&x);
        FlipState { x, field, energy }
    }

    /// Energy change of flipping variable `i`.
    #[inline]
    pub fn delta(&self, i: usize) -> f64 {
        if self.x[i] == 0 {
            self.field[i]
        } else {
            -self.field[i]
        }
    }

    #[inline]
    pub fn flip(&mut self, model: &Compiled, i: usize) {
        self.energy += self.delta(i);
        let sign = if self.x[i] == 0 { 1.0 } else { -1.0 };
        self.x[i] ^= 1;
        for &(j, w) in &model.adj[i] {
            self.field[j] += sign * w;
        }
    }
}
