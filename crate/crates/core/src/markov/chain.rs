use std::collections::HashMap;
use std::ops::Range;

use num_traits::Float;

use super::eigen::{spectral_radius, MAX_ITERATIONS, TOLERANCE};
use super::state::{states_with, CollisionState};
use super::transition::{initial_probs, transition_prob_formula, transition_row_exact};
use crate::error::{invalid, Error, Result};
use crate::scalar::Scalar;

/// Largest station count accepted by [`build_chain`].
pub const MAX_STATIONS: usize = 20;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum ChainState {
    /// Before the first schedule: every station about to pick uniformly.
    Initial,
    Collisions(CollisionState),
    /// Collision-free schedule.
    Absorbed,
}

/// States sharing one colliding-station count.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Block {
    pub colliding: usize,
    pub range: Range<usize>,
}

/// Transition matrix of the L-ZC collision chain.
///
/// State order is `[Initial, blocks by descending colliding count, Absorbed]`,
/// which makes the matrix block upper-triangular.
#[derive(Clone, Debug)]
pub struct ChainModel<T> {
    slots: usize,
    stations: usize,
    gamma: T,
    states: Vec<ChainState>,
    blocks: Vec<Block>,
    matrix: Vec<Vec<T>>,
}

impl<T: Scalar> ChainModel<T> {
    pub fn slots(&self) -> usize {
        self.slots
    }

    pub fn stations(&self) -> usize {
        self.stations
    }

    pub fn gamma(&self) -> &T {
        &self.gamma
    }

    pub fn states(&self) -> &[ChainState] {
        &self.states
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    /// Full row-stochastic matrix including the initial and absorbing states.
    pub fn matrix(&self) -> &[Vec<T>] {
        &self.matrix
    }

    pub fn absorbing_index(&self) -> usize {
        self.states.len() - 1
    }

    /// Transitions among transient states (everything but the absorbing one).
    pub fn transient_matrix(&self) -> Vec<Vec<T>> {
        let t = self.absorbing_index();
        self.matrix[..t].iter().map(|r| r[..t].to_vec()).collect()
    }

    /// Diagonal block for the given colliding-station count.
    pub fn block_matrix(&self, colliding: usize) -> Option<Vec<Vec<T>>> {
        let b = self.blocks.iter().find(|b| b.colliding == colliding)?;
        Some(self.matrix[b.range.clone()].iter().map(|r| r[b.range.clone()].to_vec()).collect())
    }

    pub fn index_of(&self, state: &ChainState) -> Option<usize> {
        self.states.iter().position(|s| s == state)
    }

    pub fn row_sums(&self) -> Vec<T> {
        self.matrix.iter().map(|r| r.iter().fold(T::zero(), |a, p| a + p.clone())).collect()
    }

    /// Converts every entry, e.g. from exact rationals to `f64`.
    pub fn map<U: Scalar>(&self, f: impl Fn(&T) -> U) -> ChainModel<U> {
        ChainModel {
            slots: self.slots,
            stations: self.stations,
            gamma: f(&self.gamma),
            states: self.states.clone(),
            blocks: self.blocks.clone(),
            matrix: self.matrix.iter().map(|r| r.iter().map(&f).collect()).collect(),
        }
    }
}

/// Assembles the chain: the initial row from the uniform first choice,
/// diagonal blocks from the closed formula, everything else from the exact
/// enumerator.
pub fn build_chain<T: Scalar>(slots: usize, stations: usize, gamma: T) -> Result<ChainModel<T>> {
    if stations == 0 {
        return Err(invalid("stations", stations, "must be at least 1"));
    }
    if stations > MAX_STATIONS {
        return Err(Error::StateSpaceTooLarge(stations));
    }
    if stations > slots {
        return Err(invalid("stations", stations, "must not exceed the schedule length"));
    }
    if gamma <= T::zero() || gamma >= T::one() {
        return Err(invalid("gamma", format!("{gamma:?}"), "must lie in (0,1)"));
    }

    let mut states = vec![ChainState::Initial];
    let mut blocks = Vec::new();
    for colliding in (2..=stations).rev() {
        let start = states.len();
        states.extend(states_with(colliding as u32).into_iter().map(ChainState::Collisions));
        blocks.push(Block { colliding, range: start..states.len() });
    }
    states.push(ChainState::Absorbed);
    let size = states.len();
    let absorbing = size - 1;
    let index: HashMap<CollisionState, usize> = states
        .iter()
        .enumerate()
        .filter_map(|(i, s)| match s {
            ChainState::Collisions(c) => Some((c.clone(), i)),
            _ => None,
        })
        .collect();
    let locate = |key: &Option<CollisionState>| match key {
        None => absorbing,
        Some(s) => index[s],
    };

    let mut matrix = vec![vec![T::zero(); size]; size];
    for (key, p) in initial_probs::<T>(slots, stations)? {
        matrix[0][locate(&key)] = p;
    }
    for block in &blocks {
        for i in block.range.clone() {
            let ChainState::Collisions(from) = &states[i] else { unreachable!("blocks hold collision states") };
            for j in block.range.clone() {
                let ChainState::Collisions(to) = &states[j] else { unreachable!("blocks hold collision states") };
                matrix[i][j] = transition_prob_formula(from, to, slots, stations, &gamma)?;
            }
            for (key, p) in transition_row_exact(from, slots, stations, &gamma)? {
                let j = locate(&key);
                if !block.range.contains(&j) {
                    matrix[i][j] = p;
                }
            }
        }
    }
    matrix[absorbing][absorbing] = T::one();

    Ok(ChainModel { slots, stations, gamma, states, blocks, matrix })
}

/// Subdominant eigenvalue of the chain and where it comes from.
#[derive(Clone, Debug, PartialEq)]
pub struct Subdominant<T> {
    pub value: T,
    /// Colliding-station count of the block attaining the maximum.
    pub maximiser: usize,
    /// `(colliding count, spectral radius)` of every diagonal block.
    pub per_block: Vec<(usize, T)>,
}

/// Largest spectral radius over the diagonal blocks. Because the matrix is
/// block-triangular its characteristic polynomial factors over the blocks, so
/// this is the largest eigenvalue below the absorbing eigenvalue 1.
pub fn second_eigenvalue<T: Scalar + Float>(chain: &ChainModel<T>) -> Subdominant<T> {
    let tol = T::from(TOLERANCE).unwrap_or_else(T::epsilon);
    let per_block: Vec<(usize, T)> = chain
        .blocks
        .iter()
        .map(|b| {
            let g = chain.block_matrix(b.colliding).expect("block exists");
            (b.colliding, spectral_radius(&g, tol, MAX_ITERATIONS).value)
        })
        .collect();
    let (maximiser, value) =
        per_block.iter().copied().fold((0, T::zero()), |best, (c, v)| if v > best.1 { (c, v) } else { best });
    Subdominant { value, maximiser, per_block }
}

/// Eigenvalue of the two-station collision block, which dominates in
/// practice: `gamma^2 + (1 - gamma)^2 / (C - N + 1)`.
pub fn lambda_star_closed<T: Scalar>(slots: usize, stations: usize, gamma: &T) -> Result<T> {
    if stations > slots {
        return Err(invalid("stations", stations, "must not exceed the schedule length"));
    }
    let stay = gamma.clone() * gamma.clone();
    let jump = (T::one() - gamma.clone()) * (T::one() - gamma.clone());
    Ok(stay + jump / T::from_len(slots - stations + 1))
}

/// Stay probability minimising [`lambda_star_closed`]: `1 / (C - N + 2)`.
pub fn gamma_opt<T: Scalar>(slots: usize, stations: usize) -> Result<T> {
    if stations > slots {
        return Err(invalid("stations", stations, "must not exceed the schedule length"));
    }
    Ok(T::ratio(1, (slots - stations + 2) as u64))
}

/// Expected number of schedules spent in transient states starting from the
/// initial state, `e_IS (I - P_T)^{-1} 1`.
///
/// The initial state counts as one schedule, so a network that is
/// collision-free on its first schedule scores 1. Solved block by block from
/// the two-station block upwards.
pub fn mean_convergence<T: Scalar>(chain: &ChainModel<T>) -> Result<T> {
    let n = chain.absorbing_index();
    let mut x = vec![T::zero(); n];
    // blocks are stored by descending colliding count; solve smallest first
    for block in chain.blocks.iter().rev() {
        let r = block.range.clone();
        let dim = r.len();
        let mut a = vec![vec![T::zero(); dim]; dim];
        let mut rhs = vec![T::one(); dim];
        for (bi, i) in r.clone().enumerate() {
            for (bj, j) in r.clone().enumerate() {
                let delta = if bi == bj { T::one() } else { T::zero() };
                a[bi][bj] = delta - chain.matrix[i][j].clone();
            }
            for (p, xj) in chain.matrix[i][r.end..n].iter().zip(&x[r.end..n]) {
                rhs[bi] = rhs[bi].clone() + p.clone() * xj.clone();
            }
        }
        let sol = solve_dense(a, rhs)?;
        for (bi, i) in r.enumerate() {
            x[i] = sol[bi].clone();
        }
    }
    let mut total = T::one();
    for (p, xj) in chain.matrix[0][1..n].iter().zip(&x[1..n]) {
        total = total + p.clone() * xj.clone();
    }
    Ok(total)
}

/// Mean number of schedules that contain a collision before the first
/// collision-free one; the simulator's convergence index has this mean.
pub fn mean_collision_schedules<T: Scalar>(chain: &ChainModel<T>) -> Result<T> {
    Ok(mean_convergence(chain)? - T::one())
}

/// Gaussian elimination with partial pivoting.
#[allow(clippy::needless_range_loop)]
pub fn solve_dense<T: Scalar>(mut a: Vec<Vec<T>>, mut b: Vec<T>) -> Result<Vec<T>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap_or(std::cmp::Ordering::Equal))
            .ok_or(Error::Singular)?;
        if a[pivot][col].is_zero() {
            return Err(Error::Singular);
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            if a[row][col].is_zero() {
                continue;
            }
            let factor = a[row][col].clone() / a[col][col].clone();
            for k in col..n {
                let v = a[col][k].clone();
                a[row][k] = a[row][k].clone() - factor.clone() * v;
            }
            b[row] = b[row].clone() - factor * b[col].clone();
        }
    }
    let mut x = vec![T::zero(); n];
    for row in (0..n).rev() {
        let mut acc = b[row].clone();
        for k in row + 1..n {
            acc = acc - a[row][k].clone() * x[k].clone();
        }
        x[row] = acc / a[row][row].clone();
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::BigRational;
    use num_traits::One;

    #[test]
    fn two_stations_two_slots_exact() {
        let half = BigRational::ratio(1, 2);
        let chain = build_chain(2, 2, half.clone()).unwrap();
        assert_eq!(chain.states().len(), 3);
        let m = chain.matrix();
        assert_eq!(m[0][1], half);
        assert_eq!(m[0][2], half);
        assert_eq!(m[1][1], half);
        assert_eq!(m[1][2], half);
        assert!(m[2][2].is_one());
        assert_eq!(mean_convergence(&chain).unwrap(), BigRational::ratio(2, 1));
        assert_eq!(mean_collision_schedules(&chain).unwrap(), BigRational::one());
        let lam = second_eigenvalue(&chain.map(|p| p.to_f64_lossy()));
        assert!((lam.value - 0.5).abs() < 1e-12);
    }

    #[test]
    fn single_station_is_absorbed_immediately() {
        let chain = build_chain(4, 1, 0.5).unwrap();
        assert_eq!(chain.states().len(), 2);
        assert_eq!(mean_convergence(&chain).unwrap(), 1.0);
        assert_eq!(mean_collision_schedules(&chain).unwrap(), 0.0);
        assert!(chain.blocks().is_empty());
    }

    #[test]
    fn rows_are_stochastic_and_block_triangular() {
        for stations in 2..=6 {
            for slots in stations..=stations + 3 {
                let chain = build_chain(slots, stations, 0.35).unwrap();
                for s in chain.row_sums() {
                    assert!((s - 1.0).abs() < 1e-12);
                }
                let colliding = |i: usize| match &chain.states()[i] {
                    ChainState::Collisions(c) => c.colliding_stations(),
                    ChainState::Absorbed => 0,
                    ChainState::Initial => usize::MAX,
                };
                for (i, row) in chain.matrix().iter().enumerate().skip(1) {
                    for (j, &p) in row.iter().enumerate() {
                        if colliding(j) > colliding(i) {
                            assert_eq!(p, 0.0);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn closed_form_values() {
        assert_eq!(lambda_star_closed(16, 16, &0.5).unwrap(), 0.5);
        assert_eq!(lambda_star_closed(16, 14, &0.25).unwrap(), 0.25);
        assert_eq!(gamma_opt::<f64>(16, 16).unwrap(), 0.5);
        assert_eq!(gamma_opt::<f64>(16, 14).unwrap(), 0.25);
        assert!(lambda_star_closed(4, 5, &0.5).is_err());
    }

    #[test]
    fn closed_form_minimised_at_gamma_opt() {
        for (c, n) in [(16usize, 16usize), (16, 14), (12, 5)] {
            let g = gamma_opt::<f64>(c, n).unwrap();
            let best = lambda_star_closed(c, n, &g).unwrap();
            for k in 1..1000 {
                let other = lambda_star_closed(c, n, &(k as f64 / 1000.0)).unwrap();
                assert!(other >= best - 1e-15);
            }
            // derivative 2g - 2(1-g)/(C-N+1) vanishes at g*
            let d = 2.0 * g - 2.0 * (1.0 - g) / (c - n + 1) as f64;
            assert!(d.abs() < 1e-15);
        }
    }

    #[test]
    fn build_guards() {
        assert!(matches!(build_chain(30, 21, 0.5), Err(Error::StateSpaceTooLarge(21))));
        assert!(build_chain(4, 5, 0.5).is_err());
        assert!(build_chain(4, 3, 1.0).is_err());
        assert!(build_chain(4, 3, 0.0).is_err());
    }

    #[test]
    fn dense_solver() {
        let a = vec![vec![0.0, 2.0], vec![1.0, 1.0]];
        let x = solve_dense(a, vec![4.0, 3.0]).unwrap();
        assert_eq!(x, vec![1.0, 2.0]);
        assert_eq!(solve_dense(vec![vec![1.0, 1.0], vec![1.0, 1.0]], vec![1.0, 1.0]), Err(Error::Singular));
    }
}
