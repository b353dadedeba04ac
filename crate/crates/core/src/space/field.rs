//! Energy, gradient and gradient descent for a fixed set of charges and springs.

use serde::{Deserialize, Serialize};

use super::SpaceError;
use crate::par::{self, Execution};

/// Halvings tried on one descent step before the round gives up.
const MAX_HALVINGS: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Energy {
    pub total: f64,
    pub rep: f64,
    pub att: f64,
}

/// `q_u q_v / max(|x_u - x_v|, delta)`.
pub fn rep_energy(xu: &[f64], xv: &[f64], qu: f64, qv: f64, delta: f64) -> f64 {
    qu * qv / distance(xu, xv).max(delta)
}

/// `k |x_u - x_v|^2`.
pub fn att_energy(xu: &[f64], xv: &[f64], k: f64) -> f64 {
    k * squared_distance(xu, xv)
}

pub(crate) fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub(crate) fn distance(a: &[f64], b: &[f64]) -> f64 {
    squared_distance(a, b).sqrt()
}

pub fn norm(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Spring {
    pub a: usize,
    pub b: usize,
    pub k: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Descent {
    pub step: f64,
    pub max_iters: usize,
    pub epsilon: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Relaxation {
    pub converged: bool,
    /// Accepted descent steps.
    pub iterations: usize,
    pub energy: Energy,
}

/// Particles with frozen charges and springs, positions passed in as a flat
/// `n * dim` buffer.
///
/// Particles in the same group (language) repel; springs may only join
/// particles of different groups.
#[derive(Debug, Clone)]
pub struct FrozenField {
    dim: usize,
    groups: Vec<usize>,
    charges: Vec<f64>,
    springs: Vec<Spring>,
    pinned: Option<usize>,
    delta: f64,
    /// Per group, member indices in ascending order.
    members: Vec<Vec<usize>>,
    spring_adj: Vec<Vec<(usize, f64)>>,
    exec: Execution,
}

impl FrozenField {
    pub fn new(
        dim: usize,
        groups: Vec<usize>,
        charges: Vec<f64>,
        springs: Vec<Spring>,
        pinned: Option<usize>,
        delta: f64,
    ) -> Result<Self, SpaceError> {
        let n = groups.len();
        if charges.len() != n {
            return Err(SpaceError::DimensionMismatch {
                expected: n,
                got: charges.len(),
            });
        }
        let n_groups = groups.iter().copied().max().map_or(0, |g| g + 1);
        let mut members = vec![Vec::new(); n_groups];
        for (i, g) in groups.iter().enumerate() {
            members[*g].push(i);
        }
        let mut spring_adj = vec![Vec::new(); n];
        for s in &springs {
            if s.a >= n || s.b >= n || groups[s.a] == groups[s.b] {
                return Err(SpaceError::InvalidSpring(s.a, s.b));
            }
            spring_adj[s.a].push((s.b, s.k));
            spring_adj[s.b].push((s.a, s.k));
        }
        Ok(FrozenField {
            dim,
            groups,
            charges,
            springs,
            pinned,
            delta,
            members,
            spring_adj,
            exec: Execution::for_len(n),
        })
    }

    /// Forces one execution path; results are identical either way.
    pub fn with_execution(mut self, exec: Execution) -> Self {
        self.exec = exec;
        self
    }

    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn springs(&self) -> &[Spring] {
        &self.springs
    }

    /// Unordered same-group pairs `(i, j)`, `i < j`: the repulsion terms.
    pub fn repulsion_pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.members.iter().flat_map(|m| {
            m.iter()
                .enumerate()
                .flat_map(move |(k, &i)| m[k + 1..].iter().map(move |&j| (i, j)))
        })
    }

    fn point<'a>(&self, x: &'a [f64], i: usize) -> &'a [f64] {
        &x[i * self.dim..(i + 1) * self.dim]
    }

    pub fn energy(&self, x: &[f64]) -> Energy {
        let n = self.len();
        let rep_parts = par::map_indices(self.exec, n, |i| {
            let qi = self.charges[i];
            if qi == 0.0 {
                return 0.0;
            }
            let xi = self.point(x, i);
            let mut e = 0.0;
            for &j in self.members[self.groups[i]].iter().filter(|&&j| j > i) {
                e += rep_energy(xi, self.point(x, j), qi, self.charges[j], self.delta);
            }
            e
        });
        let att_parts = par::map_slice(self.exec, &self.springs, |s| {
            att_energy(self.point(x, s.a), self.point(x, s.b), s.k)
        });
        let rep = par::ordered_sum(&rep_parts);
        let att = par::ordered_sum(&att_parts);
        Energy {
            total: rep + att,
            rep,
            att,
        }
    }

    /// Analytic gradient of `energy` with respect to every coordinate,
    /// including the pinned particle's.
    ///
    /// Same-language pairs closer than `delta` get the repulsive force they
    /// would feel at distance `delta`, although the energy is flat there.
    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; x.len()];
        if self.dim == 0 {
            return g;
        }
        par::for_each_chunk_mut(self.exec, &mut g, self.dim, |i, gi| {
            let xi = self.point(x, i);
            let qi = self.charges[i];
            if qi != 0.0 {
                for &j in &self.members[self.groups[i]] {
                    let qq = qi * self.charges[j];
                    if j == i || qq == 0.0 {
                        continue;
                    }
                    let xj = self.point(x, j);
                    let r = distance(xi, xj);
                    // inside the floor the energy is flat; push apart with
                    // the force at `delta` so near-coincident words separate
                    if r > 0.0 {
                        let rf = r.max(self.delta);
                        let coef = -qq / (rf * rf * r);
                        for d in 0..self.dim {
                            gi[d] += coef * (xi[d] - xj[d]);
                        }
                    }
                }
            }
            for &(j, k) in &self.spring_adj[i] {
                let xj = self.point(x, j);
                for d in 0..self.dim {
                    gi[d] += 2.0 * k * (xi[d] - xj[d]);
                }
            }
        });
        g
    }

    fn max_displacement(&self, g: &[f64], step: f64) -> f64 {
        g.chunks(self.dim)
            .enumerate()
            .filter(|(i, _)| Some(*i) != self.pinned)
            .map(|(_, gi)| step * norm(gi))
            .fold(0.0, f64::max)
    }

    /// Per-particle factors that scale gradients longer than 1 down to unit length.
    fn clip_factors(&self, g: &[f64]) -> Vec<f64> {
        g.chunks(self.dim)
            .map(|gi| {
                let n = norm(gi);
                if n > 1.0 {
                    1.0 / n
                } else {
                    1.0
                }
            })
            .collect()
    }

    /// Gradient descent on `x` with the pinned particle held fixed.
    ///
    /// Each particle's gradient is clipped to unit length before stepping,
    /// so a near-coincident start (distances around `delta`) separates over
    /// several small moves instead of one huge jump. Minima are unchanged.
    /// A step that would raise the energy is retried at half the step size;
    /// after an accepted step the size grows back by 2x, never beyond
    /// `params.step`. Converged means a full-size step would move no particle
    /// by `params.epsilon` or more.
    pub fn relax(&self, x: &mut [f64], params: &Descent) -> Result<Relaxation, SpaceError> {
        if x.len() != self.len() * self.dim {
            return Err(SpaceError::DimensionMismatch {
                expected: self.len() * self.dim,
                got: x.len(),
            });
        }
        let mut energy = self.energy(x);
        if !energy.total.is_finite() || x.iter().any(|v| !v.is_finite()) {
            return Err(SpaceError::NonFiniteCoordinate);
        }
        let mut step = params.step;
        let mut trial = x.to_vec();
        let mut iterations = 0;
        let mut converged = false;
        while iterations < params.max_iters {
            let g = self.gradient(x);
            if g.iter().any(|v| !v.is_finite()) {
                return Err(SpaceError::NonFiniteCoordinate);
            }
            if self.max_displacement(&g, params.step) < params.epsilon {
                converged = true;
                break;
            }
            let clip = self.clip_factors(&g);
            let mut accepted = None;
            for _ in 0..MAX_HALVINGS {
                for (i, ((t, xv), gv)) in trial.iter_mut().zip(x.iter()).zip(&g).enumerate() {
                    let p = i / self.dim;
                    *t = if Some(p) == self.pinned {
                        *xv
                    } else {
                        xv - step * clip[p] * gv
                    };
                }
                let e = self.energy(&trial);
                if e.total.is_finite() && e.total <= energy.total {
                    accepted = Some(e);
                    break;
                }
                step *= 0.5;
            }
            let Some(e) = accepted else {
                break;
            };
            x.copy_from_slice(&trial);
            energy = e;
            iterations += 1;
            step = (step * 2.0).min(params.step);
        }
        if !converged && iterations == params.max_iters {
            let g = self.gradient(x);
            converged = self.max_displacement(&g, params.step) < params.epsilon;
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(SpaceError::NonFiniteCoordinate);
        }
        Ok(Relaxation {
            converged,
            iterations,
            energy,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn pair_energies() {
        assert_eq!(rep_energy(&[0.0, 0.0], &[2.0, 0.0], 1.0, 1.0, 1e-6), 0.5);
        assert_eq!(rep_energy(&[1.0, 1.0], &[1.0, 1.0], 2.0, 3.0, 1e-3), 6000.0);
        assert_eq!(rep_energy(&[0.0, 0.0], &[2.0, 0.0], 0.0, 1.0, 1e-6), 0.0);
        assert_eq!(att_energy(&[0.0, 0.0], &[3.0, 0.0], 2.0), 18.0);
        assert_eq!(att_energy(&[1.0, 2.0], &[1.0, 2.0], 2.0), 0.0);
        assert_eq!(att_energy(&[0.0, 0.0], &[3.0, 0.0], 0.0), 0.0);
    }

    #[test]
    fn totals_for_small_systems() {
        // one en + one ja word on a unit spring
        let f = FrozenField::new(
            2,
            vec![0, 1],
            vec![1.0, 1.0],
            vec![Spring { a: 0, b: 1, k: 1.0 }],
            None,
            1e-6,
        )
        .unwrap();
        assert_eq!(
            f.energy(&[0.0, 0.0, 1.0, 0.0]),
            Energy {
                total: 1.0,
                rep: 0.0,
                att: 1.0
            }
        );
        // two en words, no springs
        let f = FrozenField::new(2, vec![0, 0], vec![1.0, 1.0], vec![], None, 1e-6).unwrap();
        assert_eq!(
            f.energy(&[0.0, 0.0, 2.0, 0.0]),
            Energy {
                total: 0.5,
                rep: 0.5,
                att: 0.0
            }
        );
    }

    #[test]
    fn gradient_magnitudes() {
        let f = FrozenField::new(2, vec![0, 0], vec![1.0, 1.0], vec![], None, 1e-6).unwrap();
        let g = f.gradient(&[0.0, 0.0, 2.0, 0.0]);
        // d/dr (1/r) = -1/r^2: each word is pushed away from the other
        assert_eq!(g, vec![0.25, 0.0, -0.25, 0.0]);

        let f = FrozenField::new(
            2,
            vec![0, 1],
            vec![0.0, 0.0],
            vec![Spring { a: 0, b: 1, k: 1.0 }],
            None,
            1e-6,
        )
        .unwrap();
        let g = f.gradient(&[0.0, 0.0, 3.0, 0.0]);
        // d/dr (k r^2) = 2 k r: pulled together
        assert_eq!(g, vec![-6.0, 0.0, 6.0, 0.0]);
    }

    #[test]
    fn same_group_spring_rejected() {
        assert!(FrozenField::new(
            2,
            vec![0, 0],
            vec![1.0, 1.0],
            vec![Spring { a: 0, b: 1, k: 1.0 }],
            None,
            1e-6
        )
        .is_err());
    }

    #[test]
    fn pinned_particle_never_moves() {
        let f = FrozenField::new(
            2,
            vec![1, 0, 0],
            vec![1.0, 1.0, 1.0],
            vec![Spring { a: 0, b: 1, k: 1.0 }, Spring { a: 0, b: 2, k: 1.0 }],
            Some(0),
            1e-6,
        )
        .unwrap();
        let mut x = vec![0.0, 0.0, 0.3, 0.1, -0.2, -0.4];
        f.relax(
            &mut x,
            &Descent {
                step: 0.05,
                max_iters: 500,
                epsilon: 1e-9,
            },
        )
        .unwrap();
        assert_eq!(x[0].to_bits(), 0.0f64.to_bits());
        assert_eq!(x[1].to_bits(), 0.0f64.to_bits());
    }

    #[test]
    fn coincident_start_moves_at_most_one_step_per_iteration() {
        // two ja words 1e-6 apart on springs to a pinned en word
        let f = FrozenField::new(
            2,
            vec![0, 1, 1],
            vec![1.0, 1.0, 1.0],
            vec![Spring { a: 0, b: 1, k: 1.0 }, Spring { a: 0, b: 2, k: 1.0 }],
            Some(0),
            1e-6,
        )
        .unwrap();
        let mut x = vec![0.0, 0.0, 1e-6, 0.0, 0.0, 0.0];
        let params = Descent {
            step: 0.05,
            max_iters: 1,
            epsilon: 1e-4,
        };
        f.relax(&mut x, &params).unwrap();
        assert!(norm(&x[2..4]) <= 0.05 + 1e-6);
        assert!(norm(&x[4..6]) <= 0.05);
        // and the pair still reaches the analytic equilibrium: r = 0.5 each side
        let params = Descent {
            max_iters: 5000,
            epsilon: 1e-10,
            ..params
        };
        let r = f.relax(&mut x, &params).unwrap();
        assert!(r.converged);
        assert!((norm(&x[2..4]) - 0.5).abs() < 1e-6, "{x:?} {r:?}");
    }

    #[test]
    fn sequential_and_parallel_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 150;
        let groups: Vec<usize> = (0..n).map(|i| i % 3).collect();
        let charges: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
        let springs: Vec<Spring> = (0..n)
            .flat_map(|i| [(i, (i + 1) % n), (i, (i + 4) % n)])
            .filter(|(a, b)| a % 3 != b % 3)
            .map(|(a, b)| Spring { a, b, k: 0.5 })
            .collect();
        let x: Vec<f64> = (0..2 * n).map(|_| rng.random_range(-3.0..3.0)).collect();
        let base = FrozenField::new(2, groups, charges, springs, Some(0), 1e-6).unwrap();
        let seq = base.clone().with_execution(Execution::Sequential);
        let par = base.with_execution(Execution::Parallel);
        assert_eq!(seq.gradient(&x), par.gradient(&x));
        assert_eq!(seq.energy(&x), par.energy(&x));
        let (mut xs, mut xp) = (x.clone(), x);
        let d = Descent {
            step: 0.01,
            max_iters: 20,
            epsilon: 1e-6,
        };
        seq.relax(&mut xs, &d).unwrap();
        par.relax(&mut xp, &d).unwrap();
        assert_eq!(xs, xp);
    }

    fn arb_system() -> impl Strategy<Value = (FrozenField, Vec<f64>)> {
        (2usize..8, any::<u64>()).prop_map(|(n, seed)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let groups: Vec<usize> = (0..n).map(|i| i % 2).collect();
            let charges = (0..n).map(|_| rng.random_range(0.1..2.0)).collect();
            let mut springs = Vec::new();
            for a in 0..n {
                for b in a + 1..n {
                    if a % 2 != b % 2 && rng.random_bool(0.6) {
                        springs.push(Spring {
                            a,
                            b,
                            k: rng.random_range(0.1..2.0),
                        });
                    }
                }
            }
            let x = (0..2 * n).map(|_| rng.random_range(-2.0..2.0)).collect();
            (
                FrozenField::new(2, groups, charges, springs, Some(0), 1e-6).unwrap(),
                x,
            )
        })
    }

    proptest! {
        #[test]
        fn homogeneity((field, x) in arb_system(), s in 0.2f64..5.0) {
            let e = field.energy(&x);
            let xs: Vec<f64> = x.iter().map(|v| v * s).collect();
            let es = field.energy(&xs);
            prop_assert!((es.rep - e.rep / s).abs() <= 1e-9 * (1.0 + e.rep / s));
            prop_assert!((es.att - e.att * s * s).abs() <= 1e-9 * (1.0 + e.att * s * s));
        }

        #[test]
        fn descent_is_monotone((field, mut x) in arb_system()) {
            let mut prev = field.energy(&x).total;
            for _ in 0..30 {
                field.relax(&mut x, &Descent { step: 0.05, max_iters: 1, epsilon: 1e-12 }).unwrap();
                let e = field.energy(&x).total;
                prop_assert!(e <= prev);
                prev = e;
            }
        }

        #[test]
        fn terms_respect_languages((field, _x) in arb_system()) {
            for (i, j) in field.repulsion_pairs() {
                prop_assert_eq!(field.groups[i], field.groups[j]);
            }
            for s in field.springs() {
                prop_assert_ne!(field.groups[s.a], field.groups[s.b]);
            }
        }

        #[test]
        fn force_locality((field, x) in arb_system(), who in 0usize..8, dx in -0.5f64..0.5) {
            // Moving one particle only changes the gradient of itself, its
            // same-group peers and its spring partners.
            let who = who % field.len();
            let mut y = x.clone();
            y[who * 2] += dx;
            let (g0, g1) = (field.gradient(&x), field.gradient(&y));
            for i in 0..field.len() {
                let coupled = i == who
                    || field.groups[i] == field.groups[who]
                    || field.spring_adj[i].iter().any(|(j, _)| *j == who);
                if !coupled {
                    prop_assert_eq!(&g0[i * 2..i * 2 + 2], &g1[i * 2..i * 2 + 2]);
                }
            }
        }
    }
}
