//! Finite-field DFT over blocks of generations, block diagonalization of
//! block-circulant transfer operators, and the cyclic-prefix pipelines.
//!
//! Vectors of generations are stacked newest first: position p of a stacked
//! vector over n generations holds generation n−1−p, and a process-major
//! layout is used inside each position (`p·μ + l`).

use crate::error::{Error, Result};
use crate::galois::{Embedding, Fe, Field};
use crate::netmodel::{
    simulate, transfer_matrices, GapPolicy, LecAssignment, LecMode, NetworkSpec, Streams, TransferSet,
};
use crate::polymatrix::{FieldMatrix, Matrix, PolyMatrix};

#[derive(Clone, Debug)]
pub struct DftCtx {
    pub field: Field,
    pub n: usize,
    pub alpha: Fe,
    powers: Vec<Fe>,
    inv_powers: Vec<Fe>,
    n_inv: Fe,
}

impl DftCtx {
    /// `alpha` must have multiplicative order exactly `n`; when omitted the
    /// canonical n-th root of unity of the field is used.
    pub fn new(field: &Field, n: usize, alpha: Option<Fe>) -> Result<Self> {
        if n == 0 {
            return Err(Error::Params("block length must be positive".into()));
        }
        let alpha = match alpha {
            Some(a) => {
                field.check(a)?;
                let ord = field.element_order(a)?;
                if ord != n as u64 {
                    return Err(Error::Params(format!(
                        "alpha {} has order {ord}, expected {n}",
                        field.format(a)
                    )));
                }
                a
            }
            None => field.nth_root_of_unity(n as u64)?,
        };
        let powers: Vec<Fe> = (0..n).map(|k| field.pow(alpha, k as u64)).collect();
        let inv_alpha = field.inv(alpha)?;
        let inv_powers: Vec<Fe> = (0..n).map(|k| field.pow(inv_alpha, k as u64)).collect();
        let n_inv = field.inv(field.scalar(n as u64)).map_err(|_| {
            Error::Params(format!("block length {n} is a multiple of the characteristic"))
        })?;
        Ok(DftCtx {
            field: field.clone(),
            n,
            alpha,
            powers,
            inv_powers,
            n_inv,
        })
    }

    /// α^e for any integer exponent.
    pub fn alpha_pow(&self, e: i64) -> Fe {
        self.powers[e.rem_euclid(self.n as i64) as usize]
    }

    /// The DFT matrix, entry (j, k) = α^{jk}.
    pub fn f_matrix(&self) -> FieldMatrix {
        Matrix::from_fn(self.n, self.n, |j, k| self.powers[(j * k) % self.n])
    }

    pub fn f_inv_matrix(&self) -> FieldMatrix {
        let f = &self.field;
        Matrix::from_fn(self.n, self.n, |j, k| f.mul(self.n_inv, self.inv_powers[(j * k) % self.n]))
    }

    /// Q_μ = F ⊗ I_μ as an explicit matrix.
    pub fn q_matrix(&self, mu: usize) -> FieldMatrix {
        let f = self.f_matrix();
        let id = Matrix::identity(&self.field, mu);
        f.kron(&self.field, &id)
    }

    pub fn q_inv_matrix(&self, mu: usize) -> FieldMatrix {
        let f = self.f_inv_matrix();
        let id = Matrix::identity(&self.field, mu);
        f.kron(&self.field, &id)
    }

    fn apply(&self, x: &[Fe], mu: usize, table: &[Fe], scale: Option<Fe>) -> Result<Vec<Fe>> {
        if x.len() != self.n * mu {
            return Err(Error::Dimension(format!(
                "expected {} symbols, got {}",
                self.n * mu,
                x.len()
            )));
        }
        let f = &self.field;
        let mut out = vec![f.zero(); x.len()];
        for j in 0..self.n {
            for l in 0..mu {
                let mut acc = f.zero();
                for k in 0..self.n {
                    let v = x[k * mu + l];
                    if v.raw() != 0 {
                        acc = f.add(acc, f.mul(table[(j * k) % self.n], v));
                    }
                }
                out[j * mu + l] = match scale {
                    Some(s) => f.mul(s, acc),
                    None => acc,
                };
            }
        }
        Ok(out)
    }

    /// Q_μ x, computed per process.
    pub fn apply_q(&self, x: &[Fe], mu: usize) -> Result<Vec<Fe>> {
        self.apply(x, mu, &self.powers, None)
    }

    /// Q_μ⁻¹ y, computed per process.
    pub fn apply_q_inv(&self, y: &[Fe], mu: usize) -> Result<Vec<Fe>> {
        self.apply(y, mu, &self.inv_powers, Some(self.n_inv))
    }
}

/// The block-circulant operator of a CP block: block (r, c) is A^{(c−r) mod n}
/// (zero when that index exceeds the number of blocks).
pub fn block_circulant(field: &Field, blocks: &[FieldMatrix], n: usize) -> Result<FieldMatrix> {
    let (nu, mu) = block_shape(blocks)?;
    let mut a = Matrix::zeros(field, n * nu, n * mu);
    for r in 0..n {
        for c in 0..n {
            let d = (c + n - r) % n;
            if let Some(b) = blocks.get(d) {
                for x in 0..nu {
                    for y in 0..mu {
                        a.set(r * nu + x, c * mu + y, *b.get(x, y));
                    }
                }
            }
        }
    }
    Ok(a)
}

fn block_shape(blocks: &[FieldMatrix]) -> Result<(usize, usize)> {
    let first = blocks
        .first()
        .ok_or_else(|| Error::Dimension("no coefficient blocks".into()))?;
    let (nu, mu) = (first.rows(), first.cols());
    if blocks.iter().any(|b| b.rows() != nu || b.cols() != mu) {
        return Err(Error::Dimension("coefficient blocks differ in shape".into()));
    }
    Ok((nu, mu))
}

/// Diagonal blocks Â^{(t)} = Σ_d α^{(n−1−t)d} A^{(d)}, returned indexed by t.
pub fn block_diagonalize(blocks: &[FieldMatrix], dft: &DftCtx) -> Result<Vec<FieldMatrix>> {
    let (nu, mu) = block_shape(blocks)?;
    if dft.n < blocks.len() {
        return Err(Error::Params(format!(
            "block length {} must exceed the largest delay {}",
            dft.n,
            blocks.len() - 1
        )));
    }
    let f = &dft.field;
    Ok((0..dft.n)
        .map(|t| {
            let mut acc = Matrix::zeros(f, nu, mu);
            for (d, b) in blocks.iter().enumerate() {
                let w = dft.alpha_pow(((dft.n - 1 - t) * d) as i64);
                acc = acc.add(f, &b.scale(f, &w)).expect("same shape");
            }
            acc
        })
        .collect())
}

/// Block-diagonal matrix with Â^{(n−1)} in the top-left corner.
pub fn block_diag(field: &Field, hats: &[FieldMatrix]) -> FieldMatrix {
    let n = hats.len();
    let (nu, mu) = (hats[0].rows(), hats[0].cols());
    let mut out = Matrix::zeros(field, n * nu, n * mu);
    for p in 0..n {
        let h = &hats[n - 1 - p];
        for x in 0..nu {
            for y in 0..mu {
                out.set(p * nu + x, p * mu + y, *h.get(x, y));
            }
        }
    }
    out
}

/// Per-bin transfer blocks: `hat[i][j][t]` = M̂_ij^{(t)}, the normalized
/// M_ij(D) evaluated at D = α^{n−1−t}.
#[derive(Clone, Debug)]
pub struct HatTransferSet {
    pub n: usize,
    pub alpha: Fe,
    pub d_min: usize,
    pub d_max: usize,
    pub hat: Vec<Vec<Vec<FieldMatrix>>>,
}

impl HatTransferSet {
    pub fn get(&self, i: usize, j: usize, t: usize) -> &FieldMatrix {
        &self.hat[i][j][t]
    }

    /// Stacked diagonal operator M̂_ij of size nν × nμ.
    pub fn block_diag(&self, field: &Field, i: usize, j: usize) -> FieldMatrix {
        block_diag(field, &self.hat[i][j])
    }

    /// Predicted per-sink outputs Σ_i M̂_ij^{(t)} X_i^{(t)} for stacked inputs.
    pub fn apply(&self, field: &Field, x: &[Vec<Fe>]) -> Vec<Vec<Fe>> {
        let sinks = self.hat[0].len();
        (0..sinks)
            .map(|j| {
                let nu = self.hat[0][j][0].rows();
                let mut y = vec![field.zero(); self.n * nu];
                for (i, xi) in x.iter().enumerate() {
                    let mu = self.hat[i][j][0].cols();
                    for p in 0..self.n {
                        let t = self.n - 1 - p;
                        let part = self.hat[i][j][t]
                            .mul_vec(field, &xi[p * mu..(p + 1) * mu])
                            .expect("shape");
                        for (o, v) in part.into_iter().enumerate() {
                            y[p * nu + o] = field.add(y[p * nu + o], v);
                        }
                    }
                }
                y
            })
            .collect()
    }
}

/// Re-expresses a transfer set over a larger field.
pub fn map_transfer(ts: &TransferSet, emb: &Embedding) -> TransferSet {
    TransferSet {
        field: emb.target().clone(),
        grid: ts
            .grid
            .iter()
            .map(|row| row.iter().map(|m| m.map_field(emb)).collect())
            .collect(),
        d_min: ts.d_min,
        d_max: ts.d_max,
    }
}

pub fn hat_transfer(ts: &TransferSet, dft: &DftCtx) -> Result<HatTransferSet> {
    if ts.field != dft.field {
        return Err(Error::ContextMismatch);
    }
    if dft.n <= ts.d_max {
        return Err(Error::Params(format!(
            "block length {} must exceed d_max = {}",
            dft.n, ts.d_max
        )));
    }
    let grid = ts.normalized();
    Ok(HatTransferSet {
        n: dft.n,
        alpha: dft.alpha,
        d_min: ts.d_min,
        d_max: ts.d_max,
        hat: grid
            .iter()
            .map(|row| row.iter().map(|m| hat_of(m, dft, 0)).collect())
            .collect(),
    })
}

/// M(α^{n−1−t}) for t = 0..n−1 after dividing by D^shift.
fn hat_of(m: &PolyMatrix, dft: &DftCtx, shift: usize) -> Vec<FieldMatrix> {
    (0..dft.n)
        .map(|t| {
            let x = dft.alpha_pow((dft.n - 1 - t) as i64);
            m.map(|p| p.shift_down(shift).expect("shift below lowest degree").eval(&dft.field, x))
        })
        .collect()
}

/// Applies Q_μ and prepends the cyclic prefix. Returns wire generations in
/// transmission order (times −d_max .. n−1), each of length μ.
pub fn cp_encode(x: &[Fe], dft: &DftCtx, mu: usize, d_max: usize) -> Result<Vec<Vec<Fe>>> {
    if d_max >= dft.n {
        return Err(Error::Params(format!(
            "prefix length {d_max} must be shorter than the block length {}",
            dft.n
        )));
    }
    let xq = dft.apply_q(x, mu)?;
    let n = dft.n as i64;
    Ok((-(d_max as i64)..n)
        .map(|tau| {
            let g = tau.rem_euclid(n) as usize;
            let p = dft.n - 1 - g;
            xq[p * mu..(p + 1) * mu].to_vec()
        })
        .collect())
}

/// Drops the prefix, stacks the remaining n generations newest first and
/// applies Q_ν⁻¹.
pub fn cp_decode(wire: &[Vec<Fe>], dft: &DftCtx, nu: usize, d_max: usize) -> Result<Vec<Fe>> {
    if wire.len() != dft.n + d_max {
        return Err(Error::Dimension(format!(
            "expected {} received generations, got {}",
            dft.n + d_max,
            wire.len()
        )));
    }
    let body = &wire[d_max..];
    let mut stacked = vec![dft.field.zero(); dft.n * nu];
    for (g, gen) in body.iter().enumerate() {
        if gen.len() != nu {
            return Err(Error::Dimension("generation width mismatch".into()));
        }
        let p = dft.n - 1 - g;
        stacked[p * nu..(p + 1) * nu].copy_from_slice(gen);
    }
    dft.apply_q_inv(&stacked, nu)
}

#[derive(Clone, Debug)]
pub struct CpRun {
    /// Recovered Ŷ_j, stacked newest first.
    pub yhat: Vec<Vec<Fe>>,
    /// Channel uses per block: n + d_max.
    pub wire_slots: usize,
}

/// Runs sources through Q and the prefix, the register simulator, and the
/// sink-side decoder. `x[i]` is source i's stacked block (n·μ_i symbols).
pub fn cp_pipeline(
    net: &NetworkSpec,
    lecs: &LecAssignment,
    ts: &TransferSet,
    dft: &DftCtx,
    x: &[Vec<Fe>],
) -> Result<CpRun> {
    if net.field != dft.field {
        return Err(Error::ContextMismatch);
    }
    let (d_min, d_max) = (ts.d_min, ts.d_max);
    let mut streams = Streams {
        start: -(d_max as i64),
        x: Vec::new(),
    };
    for (i, src) in net.sources.iter().enumerate() {
        let wire = cp_encode(&x[i], dft, src.processes, d_max)?;
        streams
            .x
            .push((0..src.processes).map(|l| wire.iter().map(|g| g[l]).collect()).collect());
    }
    let horizon = d_max + d_min + dft.n;
    let out = simulate(net, lecs, &streams, horizon, GapPolicy::Error)?;
    let mut yhat = Vec::new();
    for (j, sink) in net.sinks.iter().enumerate() {
        let wire: Vec<Vec<Fe>> = (0..dft.n + d_max)
            .map(|u| (0..sink.outputs).map(|o| out[j][o][d_min + u]).collect())
            .collect();
        yhat.push(cp_decode(&wire, dft, sink.outputs, d_max)?);
    }
    Ok(CpRun {
        yhat,
        wire_slots: dft.n + d_max,
    })
}

/// One cyclic-prefix block sent without the transform. `x[i]` is source i's
/// stacked block (newest first, n·μ_i symbols). Times follow
/// [`crate::netmodel::time_varying_block_matrix`]: generation s goes out at
/// time s, the prefix occupies −d_max .. −1, and sink outputs are read at
/// d_min .. d_min + n. Returns each sink's outputs stacked newest first.
pub fn prefix_pipeline(
    net: &NetworkSpec,
    lecs: &LecAssignment,
    n: usize,
    d_min: usize,
    d_max: usize,
    x: &[Vec<Fe>],
    gaps: GapPolicy,
) -> Result<Vec<Vec<Fe>>> {
    let f = &net.field;
    let mut streams = Streams {
        start: -(d_max as i64),
        x: Vec::new(),
    };
    for (i, src) in net.sources.iter().enumerate() {
        let mu = src.processes;
        if x[i].len() != n * mu {
            return Err(Error::Dimension(format!("source {i} needs {} symbols", n * mu)));
        }
        let lanes = (0..mu)
            .map(|l| {
                (-(d_max as i64)..n as i64)
                    .map(|tau| {
                        let g = tau.rem_euclid(n as i64) as usize;
                        x[i][(n - 1 - g) * mu + l]
                    })
                    .collect()
            })
            .collect();
        streams.x.push(lanes);
    }
    let out = simulate(net, lecs, &streams, d_max + d_min + n, gaps)?;
    Ok(net
        .sinks
        .iter()
        .enumerate()
        .map(|(j, sink)| {
            let nu = sink.outputs;
            let mut y = vec![f.zero(); n * nu];
            for t in 0..n {
                for o in 0..nu {
                    y[(n - 1 - t) * nu + o] = out[j][o][d_max + d_min + t];
                }
            }
            y
        })
        .collect())
}

/// Timing of a multi-block transmission where the coefficients change from
/// one block to the next.
///
/// Each block occupies `period = k + d_max + d_min` channel uses: a prefix of
/// d_max, k data symbols, then d_min idle slots. The idle tail keeps symbols
/// still in flight from meeting the next block's coefficients.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BlockLayout {
    pub k: usize,
    pub blocks: usize,
    pub d_min: usize,
    pub d_max: usize,
}

impl BlockLayout {
    /// Uses the structural delay range of the network.
    pub fn for_network(net: &NetworkSpec, k: usize, blocks: usize) -> Result<Self> {
        let (lo, hi) = net
            .path_delay_range()
            .ok_or_else(|| Error::Network("no source reaches any sink".into()))?;
        let layout = BlockLayout {
            k,
            blocks,
            d_min: lo,
            d_max: hi - lo,
        };
        if k <= layout.d_max {
            return Err(Error::Params(format!(
                "block length {k} must exceed the delay spread {}",
                layout.d_max
            )));
        }
        Ok(layout)
    }

    pub fn period(&self) -> usize {
        self.k + self.d_max + self.d_min
    }

    /// First channel use of the coefficient schedule.
    pub fn lec_origin(&self) -> i64 {
        -(self.d_max as i64)
    }

    /// Time of the first data symbol of block `l` (0-based).
    pub fn data_start(&self, l: usize) -> i64 {
        (l * self.period()) as i64
    }

    pub fn lec_mode(&self) -> LecMode {
        LecMode::Block {
            origin: self.lec_origin(),
            len: self.period(),
        }
    }

    pub fn wire_slots(&self) -> usize {
        self.blocks * self.period()
    }
}

/// `out[i][j][l][p]` = M_ij(ε_l, α^p) for block l (0-based) and bin p, with
/// transfers normalized by the layout's d_min.
pub fn block_hat(
    net: &NetworkSpec,
    lecs: &LecAssignment,
    layout: &BlockLayout,
    dft: &DftCtx,
) -> Result<Vec<Vec<Vec<Vec<FieldMatrix>>>>> {
    if dft.n != layout.k {
        return Err(Error::Params("DFT length must equal the block length".into()));
    }
    let mut out: Vec<Vec<Vec<Vec<FieldMatrix>>>> = Vec::new();
    for l in 0..layout.blocks {
        let slice = lecs.block_slice(l as i64 + 1);
        let ts = transfer_matrices(net, &slice)?;
        for (i, row) in ts.grid.iter().enumerate() {
            if out.len() <= i {
                out.push(vec![Vec::new(); row.len()]);
            }
            for (j, m) in row.iter().enumerate() {
                let per_bin: Vec<FieldMatrix> = (0..dft.n)
                    .map(|p| {
                        let x = dft.alpha_pow(p as i64);
                        m.map(|poly| {
                            poly.shift_down(layout.d_min)
                                .expect("structural minimum bounds every path")
                                .eval(&dft.field, x)
                        })
                    })
                    .collect();
                out[i][j].push(per_bin);
            }
        }
    }
    Ok(out)
}

/// Sends `blocks` CP-protected blocks per source through the simulator.
/// `x[i][l]` is source i's pre-transform block l (k·μ_i symbols, stacked
/// newest first). Returns `[j][l]`: Q⁻¹ of sink j's k data outputs of block l.
pub fn block_cp_pipeline(
    net: &NetworkSpec,
    lecs: &LecAssignment,
    layout: &BlockLayout,
    dft: &DftCtx,
    x: &[Vec<Vec<Fe>>],
) -> Result<Vec<Vec<Vec<Fe>>>> {
    if lecs.mode != layout.lec_mode() {
        return Err(Error::Params(format!(
            "coefficient schedule must switch every {} uses starting at {}",
            layout.period(),
            layout.lec_origin()
        )));
    }
    if dft.n != layout.k || net.field != dft.field {
        return Err(Error::Params("DFT does not match the block layout or field".into()));
    }
    let f = &dft.field;
    let total = layout.wire_slots();
    let start = layout.lec_origin();
    let mut streams = Streams { start, x: Vec::new() };
    for (i, src) in net.sources.iter().enumerate() {
        if x[i].len() != layout.blocks {
            return Err(Error::Dimension(format!("source {i} needs {} blocks", layout.blocks)));
        }
        let mut lanes = vec![vec![f.zero(); total]; src.processes];
        for (l, blk) in x[i].iter().enumerate() {
            let wire = cp_encode(blk, dft, src.processes, layout.d_max)?;
            let first = layout.data_start(l) - layout.d_max as i64;
            for (u, g) in wire.iter().enumerate() {
                let idx = (first + u as i64 - start) as usize;
                for (p, v) in g.iter().enumerate() {
                    lanes[p][idx] = *v;
                }
            }
        }
        streams.x.push(lanes);
    }
    let out = simulate(net, lecs, &streams, total, GapPolicy::Error)?;
    let mut res = Vec::new();
    for (j, sink) in net.sinks.iter().enumerate() {
        let mut per_block = Vec::new();
        for l in 0..layout.blocks {
            let mut stacked = vec![f.zero(); layout.k * sink.outputs];
            for t in 0..layout.k {
                let when = layout.data_start(l) + (layout.d_min + t) as i64;
                let idx = (when - start) as usize;
                let p = layout.k - 1 - t;
                for o in 0..sink.outputs {
                    stacked[p * sink.outputs + o] = out[j][o][idx];
                }
            }
            per_block.push(dft.apply_q_inv(&stacked, sink.outputs)?);
        }
        res.push(per_block);
    }
    Ok(res)
}

/// Stacks per-generation vectors (generation order) newest first.
pub fn stack_newest_first(gens: &[Vec<Fe>]) -> Vec<Fe> {
    gens.iter().rev().flatten().copied().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn gf8() -> Field {
        Field::new(2, 3, None).unwrap()
    }

    #[test]
    fn q_roundtrip_and_inverse_matrix() {
        let f = gf8();
        let dft = DftCtx::new(&f, 7, None).unwrap();
        let prod = dft.f_matrix().mul(&f, &dft.f_inv_matrix()).unwrap();
        assert_eq!(prod, Matrix::identity(&f, 7));
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let x: Vec<Fe> = (0..14).map(|_| f.random(&mut rng)).collect();
        let back = dft.apply_q_inv(&dft.apply_q(&x, 2).unwrap(), 2).unwrap();
        assert_eq!(back, x);
        let qx = dft.q_matrix(2).mul_vec(&f, &x).unwrap();
        assert_eq!(qx, dft.apply_q(&x, 2).unwrap());
    }

    #[test]
    fn constant_stream_lands_in_one_bin() {
        let f = gf8();
        let dft = DftCtx::new(&f, 7, None).unwrap();
        let x = vec![f.one(); 7];
        let y = dft.apply_q(&x, 1).unwrap();
        assert_eq!(y[0], f.scalar(7));
        assert!(y[1..].iter().all(|v| v.raw() == 0));
    }

    #[test]
    fn single_block_diagonalizes_to_itself() {
        let f = gf8();
        let dft = DftCtx::new(&f, 7, None).unwrap();
        let a = Matrix::from_rows(vec![vec![f.primitive(), f.one()]]).unwrap();
        let hats = block_diagonalize(std::slice::from_ref(&a), &dft).unwrap();
        assert!(hats.iter().all(|h| *h == a));
    }

    #[test]
    fn encode_decode_identity_channel() {
        let f = gf8();
        let dft = DftCtx::new(&f, 7, None).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let x: Vec<Fe> = (0..7).map(|_| f.random(&mut rng)).collect();
        let wire = cp_encode(&x, &dft, 1, 2).unwrap();
        assert_eq!(wire.len(), 9);
        assert_eq!(wire[0], wire[7]);
        assert_eq!(cp_decode(&wire, &dft, 1, 2).unwrap(), x);
        let one = DftCtx::new(&f, 1, None).unwrap();
        assert_eq!(cp_encode(&x[..1], &one, 1, 0).unwrap(), vec![vec![x[0]]]);
    }

    #[test]
    fn wrong_alpha_order_rejected() {
        let f = gf8();
        assert!(DftCtx::new(&f, 7, Some(f.one())).is_err());
        assert!(matches!(DftCtx::new(&f, 5, None), Err(Error::NoRootOfUnity { .. })));
    }
}
