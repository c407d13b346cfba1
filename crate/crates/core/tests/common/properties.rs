//! Property bodies, shared by the proptest suites and the acceptance run.
//! Each takes a seed, builds a random instance from it and reports the
//! first violated identity.

use delaynet::galois::{Fe, Field};
use delaynet::netmodel::{
    impulse_response, simulate, transfer_matrices, GapPolicy, LecAssignment, NetworkSpec, Streams,
};
use delaynet::polymatrix::{polymat_det, polymat_det_bareiss, DelayPoly, FieldMatrix, Matrix, PolyMatrix};
use delaynet::transform::{block_circulant, block_diag, block_diagonalize, cp_pipeline, hat_transfer, DftCtx};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::random_dag;

pub type Check = std::result::Result<(), String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

/// (p, m, admissible block lengths)
const DFT_SETUPS: &[(u64, u32, &[usize])] = &[
    (2, 3, &[7]),
    (2, 4, &[3, 5, 15]),
    (2, 6, &[3, 7, 9, 21]),
    (3, 2, &[2, 4, 8]),
    (7, 1, &[2, 3, 6]),
    (13, 1, &[2, 3, 4, 6, 12]),
];

fn dft_setup(rng: &mut ChaCha8Rng) -> DftCtx {
    let (p, m, ns) = DFT_SETUPS[rng.gen_range(0..DFT_SETUPS.len())];
    let f = Field::new(p, m, None).unwrap();
    let n = ns[rng.gen_range(0..ns.len())];
    DftCtx::new(&f, n, None).unwrap()
}

fn random_matrix(f: &Field, r: usize, c: usize, rng: &mut ChaCha8Rng) -> FieldMatrix {
    Matrix::from_fn(r, c, |_, _| f.random(rng))
}

pub fn q_round_trip(seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dft = dft_setup(&mut rng);
    let f = dft.field.clone();
    let mu = rng.gen_range(1..=3);
    let x: Vec<Fe> = (0..dft.n * mu).map(|_| f.random(&mut rng)).collect();
    ensure!(dft.apply_q_inv(&dft.apply_q(&x, mu).unwrap(), mu).unwrap() == x, "Q^-1 Q x != x");
    ensure!(dft.apply_q(&dft.apply_q_inv(&x, mu).unwrap(), mu).unwrap() == x, "Q Q^-1 x != x");
    let id = dft.q_matrix(mu).mul(&f, &dft.q_inv_matrix(mu)).unwrap();
    ensure!(id == Matrix::identity(&f, dft.n * mu), "Q Q^-1 != I for n = {}, mu = {mu}", dft.n);
    Ok(())
}

pub fn block_circulant_factorizes(seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dft = dft_setup(&mut rng);
    let f = dft.field.clone();
    let nu = rng.gen_range(1..=3);
    let mu = rng.gen_range(1..=3);
    let taps = rng.gen_range(1..=dft.n);
    let blocks: Vec<FieldMatrix> = (0..taps).map(|_| random_matrix(&f, nu, mu, &mut rng)).collect();
    let a = block_circulant(&f, &blocks, dft.n).unwrap();
    let hat = block_diag(&f, &block_diagonalize(&blocks, &dft).unwrap());
    let rebuilt = dft.q_matrix(nu).mul(&f, &hat).unwrap().mul(&f, &dft.q_inv_matrix(mu)).unwrap();
    ensure!(a == rebuilt, "A != Q_nu A_hat Q_mu^-1 for n = {}", dft.n);
    Ok(())
}

/// Laplace expansion along the first row.
pub fn cofactor_det(f: &Field, m: &PolyMatrix) -> DelayPoly {
    let n = m.rows();
    if n == 1 {
        return m.get(0, 0).clone();
    }
    let mut acc = DelayPoly::zero();
    for c in 0..n {
        let minor = Matrix::from_fn(n - 1, n - 1, |r, k| m.get(r + 1, if k < c { k } else { k + 1 }).clone());
        let term = m.get(0, c).mul(f, &cofactor_det(f, &minor));
        acc = if c % 2 == 0 { acc.add(f, &term) } else { acc.sub(f, &term) };
    }
    acc
}

fn random_poly(f: &Field, rng: &mut ChaCha8Rng) -> DelayPoly {
    if rng.gen_bool(0.15) {
        return DelayPoly::zero();
    }
    let deg = rng.gen_range(0..=3);
    DelayPoly::from_coeffs((0..=deg).map(|_| f.random(rng)).collect())
}

const DET_FIELDS: &[(u64, u32, usize)] = &[(2, 4, 15), (3, 2, 8), (7, 1, 6), (2, 6, 63), (5, 1, 4)];

pub fn evaluation_commutes_with_det(seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (p, m, n) = DET_FIELDS[rng.gen_range(0..DET_FIELDS.len())];
    let f = Field::new(p, m, None).unwrap();
    let size = rng.gen_range(1..=4);
    let mat: PolyMatrix = Matrix::from_fn(size, size, |_, _| random_poly(&f, &mut rng));
    let oracle = cofactor_det(&f, &mat);
    ensure!(polymat_det(&f, &mat).unwrap() == oracle, "interpolated det differs from cofactor det");
    ensure!(polymat_det_bareiss(&f, &mat).unwrap() == oracle, "fraction-free det differs from cofactor det");
    let dft = DftCtx::new(&f, n, None).unwrap();
    for t in 0..n {
        let point = dft.alpha_pow(t as i64);
        let numeric = mat.eval(&f, point).det(&f).unwrap();
        ensure!(numeric == oracle.eval(&f, point), "det and evaluation disagree at alpha^{t}");
    }
    Ok(())
}

/// On unit-delay networks every path of length L carries D^L and L edge
/// gains, so evaluating at D = α^q equals scaling every gain by α^q and
/// evaluating at D = 1.
pub fn delay_point_moves_into_the_gains(seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let f = Field::new(2, 4, None).unwrap();
    let net = random_dag(&f, 10, 1, &mut rng);
    let lecs = LecAssignment::random(&f, &net.symbols(), &mut rng);
    let dft = DftCtx::new(&f, 15, None).unwrap();
    let q = rng.gen_range(0..15);
    let c = dft.alpha_pow(q);
    let ts = transfer_matrices(&net, &lecs).unwrap();
    let scaled = transfer_matrices(&net.scale_edge_gains(c), &lecs).unwrap();
    for i in 0..net.sources.len() {
        for j in 0..net.sinks.len() {
            ensure!(
                ts.grid[i][j].eval(&f, c) == scaled.grid[i][j].eval(&f, f.one()),
                "M_{i}{j}(eps, alpha^{q}) != M_{i}{j}(alpha^{q} eps, 1)"
            );
        }
    }
    Ok(())
}

fn random_streams(net: &NetworkSpec, len: usize, horizon: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<Vec<Fe>>> {
    let f = &net.field;
    net.sources
        .iter()
        .map(|s| {
            (0..s.processes)
                .map(|_| (0..horizon).map(|k| if k < len { f.random(rng) } else { f.zero() }).collect())
                .collect()
        })
        .collect()
}

pub fn time_invariant_matches_convolution(seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let f = Field::new(2, 4, None).unwrap();
    let net = random_dag(&f, 12, 3, &mut rng);
    let lecs = LecAssignment::random(&f, &net.symbols(), &mut rng);
    let horizon = 24;
    let x = random_streams(&net, rng.gen_range(1..=8), horizon, &mut rng);
    let y = simulate(&net, &lecs, &Streams { start: 0, x: x.clone() }, horizon, GapPolicy::Error).unwrap();
    let ts = transfer_matrices(&net, &lecs).unwrap();
    for (j, sink) in net.sinks.iter().enumerate() {
        for o in 0..sink.outputs {
            for k in 0..horizon {
                let mut acc = f.zero();
                for (i, src) in net.sources.iter().enumerate() {
                    for l in 0..src.processes {
                        let m = ts.grid[i][j].get(o, l);
                        for d in 0..=k {
                            acc = f.add(acc, f.mul(m.coeff(&f, d), x[i][l][k - d]));
                        }
                    }
                }
                ensure!(y[j][o][k] == acc, "sink {j} output {o} differs at time {k}");
            }
        }
    }
    Ok(())
}

pub fn time_varying_matches_path_sums(seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let f = Field::new(3, 2, None).unwrap();
    let net = random_dag(&f, 12, 2, &mut rng);
    let start = -3i64;
    let horizon = 20usize;
    let lecs = LecAssignment::random_time_varying(&f, &net.symbols(), start..start + horizon as i64, &mut rng);
    let x = random_streams(&net, rng.gen_range(1..=6), horizon, &mut rng);
    let y = simulate(&net, &lecs, &Streams { start, x: x.clone() }, horizon, GapPolicy::Error).unwrap();
    let mut expect: Vec<Vec<Vec<Fe>>> =
        net.sinks.iter().map(|s| vec![vec![f.zero(); horizon]; s.outputs]).collect();
    for (i, src) in net.sources.iter().enumerate() {
        for l in 0..src.processes {
            for (k, &v) in x[i][l].iter().enumerate() {
                if v.raw() == 0 {
                    continue;
                }
                let tau = start + k as i64;
                // responses past the horizon touch coefficients the schedule lacks
                let h = impulse_response(&net, &lecs, i, l, tau, GapPolicy::Zero).unwrap();
                for ((j, o, t), c) in h {
                    let at = t - start;
                    if (0..horizon as i64).contains(&at) {
                        let slot = &mut expect[j][o][at as usize];
                        *slot = f.add(*slot, f.mul(c, v));
                    }
                }
            }
        }
    }
    ensure!(y == expect, "simulated outputs differ from path sums");
    Ok(())
}

/// After the prefixed transform, every bin t satisfies
/// Ŷ_j^(t) = Σ_i M̂_ij^(t) X̂_i^(t) exactly.
pub fn every_bin_is_memoryless(seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let f = Field::new(2, 4, None).unwrap();
    let net = random_dag(&f, 10, 1, &mut rng);
    let lecs = LecAssignment::random(&f, &net.symbols(), &mut rng);
    let ts = transfer_matrices(&net, &lecs).unwrap();
    let dft = DftCtx::new(&f, 15, None).unwrap();
    ensure!(ts.d_max < dft.n, "delay spread {} too large for the generator", ts.d_max);
    let hat = hat_transfer(&ts, &dft).unwrap();
    let x: Vec<Vec<Fe>> = net
        .sources
        .iter()
        .map(|s| (0..dft.n * s.processes).map(|_| f.random(&mut rng)).collect())
        .collect();
    let run = cp_pipeline(&net, &lecs, &ts, &dft, &x).unwrap();
    ensure!(run.wire_slots == dft.n + ts.d_max, "wire uses {} slots", run.wire_slots);
    let expect = hat.apply(&f, &x);
    for (j, s) in net.sinks.iter().enumerate() {
        for p in 0..dft.n {
            let range = p * s.outputs..(p + 1) * s.outputs;
            ensure!(run.yhat[j][range.clone()] == expect[j][range], "sink {j} position {p}");
        }
    }
    Ok(())
}
