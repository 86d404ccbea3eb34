//! Sequence-structured ops: waveform framing, causal depthwise convolution,
//! recurrent layers, and the pieces of a selective state-space scan.
//!
//! Batched sequences live in a single matrix in *time-major* layout: a batch
//! of `n_seq` sequences of length `len` occupies `len * n_seq` rows, with row
//! `t * n_seq + s` holding step `t` of sequence `s`. Each time step is then a
//! contiguous row block, so recurrences run as one matrix product per step.

use super::{Tape, Var};
use ndarray::{s, Array2, Axis};

/// Geometry of a time-major batch of sequences.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct SeqLayout {
    pub n_seq: usize,
    pub len: usize,
}

impl SeqLayout {
    pub fn new(n_seq: usize, len: usize) -> Self {
        Self { n_seq, len }
    }

    pub fn rows(&self) -> usize {
        self.n_seq * self.len
    }

    /// Row index of step `t` in sequence `s`.
    pub fn row(&self, t: usize, seq: usize) -> usize {
        t * self.n_seq + seq
    }
}

impl Tape {
    /// Slice a batch of waveforms (one per row) into overlapping frames,
    /// time-major. The caller guarantees `(n_frames - 1) * stride + kernel`
    /// does not exceed the waveform length.
    pub fn frame_wave(&self, waves: Var, kernel: usize, stride: usize, n_frames: usize) -> Var {
        let out = self.with_value(waves, |w| {
            let (batch, len) = w.dim();
            assert!(
                (n_frames - 1) * stride + kernel <= len,
                "frame_wave: {n_frames} frames of {kernel}/{stride} need more than {len} samples"
            );
            let mut frames = Array2::zeros((n_frames * batch, kernel));
            for t in 0..n_frames {
                for b in 0..batch {
                    let src = w.slice(s![b, t * stride..t * stride + kernel]);
                    frames.row_mut(t * batch + b).assign(&src);
                }
            }
            frames
        });
        self.push_op(out, vec![waves.0], Box::new(move |ctx| {
            let (batch, len) = ctx.parents[0].dim();
            let mut g = Array2::zeros((batch, len));
            for t in 0..n_frames {
                for b in 0..batch {
                    let grow = ctx.upstream.row(t * batch + b);
                    let mut dst = g.slice_mut(s![b, t * stride..t * stride + kernel]);
                    dst += &grow;
                }
            }
            vec![Some(g)]
        }))
    }

    /// Overlap-add a time-major frame batch back into waveforms, the exact
    /// adjoint of [`Tape::frame_wave`]. Output rows are `(len-1)*stride+kernel`
    /// samples long; trim with `slice_cols` if the original signal was shorter.
    pub fn overlap_add(&self, frames: Var, stride: usize, layout: SeqLayout) -> Var {
        let kernel = self.dims(frames).1;
        let out_len = (layout.len - 1) * stride + kernel;
        let out = self.with_value(frames, |f| {
            assert_eq!(f.nrows(), layout.rows(), "overlap_add row count mismatch");
            let mut y = Array2::zeros((layout.n_seq, out_len));
            for t in 0..layout.len {
                for b in 0..layout.n_seq {
                    let row = f.row(t * layout.n_seq + b);
                    let mut dst = y.slice_mut(s![b, t * stride..t * stride + kernel]);
                    dst += &row;
                }
            }
            y
        });
        self.push_op(out, vec![frames.0], Box::new(move |ctx| {
            let mut g = Array2::zeros((layout.rows(), kernel));
            for t in 0..layout.len {
                for b in 0..layout.n_seq {
                    let src = ctx.upstream.slice(s![b, t * stride..t * stride + kernel]);
                    g.row_mut(t * layout.n_seq + b).assign(&src);
                }
            }
            vec![Some(g)]
        }))
    }

    /// Reverse every sequence in time (a cheap gather).
    pub fn reverse_time(&self, x: Var, layout: SeqLayout) -> Var {
        let mut idx = Vec::with_capacity(layout.rows());
        for t in 0..layout.len {
            let tt = layout.len - 1 - t;
            for b in 0..layout.n_seq {
                idx.push(layout.row(tt, b));
            }
        }
        self.row_select(x, idx)
    }

    /// Depthwise causal convolution along time: each channel d is filtered by
    /// its own `kernel`-tap FIR over the current and previous steps.
    pub fn conv1d_causal(&self, u: Var, w: Var, bias: Var, layout: SeqLayout) -> Var {
        let out = self.with_value(u, |uv| {
            self.with_value(w, |wv| self.with_value(bias, |bv| {
                let (rows, d) = uv.dim();
                assert_eq!(rows, layout.rows(), "conv1d_causal row count mismatch");
                assert_eq!(wv.ncols(), d, "conv1d_causal channel mismatch");
                assert_eq!(bv.dim(), (1, d), "conv1d_causal bias shape");
                let k = wv.nrows();
                let b = layout.n_seq;
                let mut y = bv.broadcast((rows, d)).unwrap().to_owned();
                for t in 0..layout.len {
                    for j in 0..k.min(t + 1) {
                        let src = uv.slice(s![(t - j) * b..(t - j + 1) * b, ..]);
                        let mut dst = y.slice_mut(s![t * b..(t + 1) * b, ..]);
                        dst += &(&src * &wv.row(j));
                    }
                }
                y
            }))
        });
        self.push_op(out, vec![u.0, w.0, bias.0], Box::new(move |ctx| {
            let uv = &ctx.parents[0];
            let wv = &ctx.parents[1];
            let k = wv.nrows();
            let b = layout.n_seq;
            let g = ctx.upstream;
            let gu = ctx.needs[0].then(|| {
                let mut gu = Array2::zeros(uv.dim());
                for t in 0..layout.len {
                    for j in 0..k.min(t + 1) {
                        let gblk = g.slice(s![t * b..(t + 1) * b, ..]);
                        let mut dst = gu.slice_mut(s![(t - j) * b..(t - j + 1) * b, ..]);
                        dst += &(&gblk * &wv.row(j));
                    }
                }
                gu
            });
            let gw = ctx.needs[1].then(|| {
                let mut gw = Array2::zeros(wv.dim());
                for t in 0..layout.len {
                    for j in 0..k.min(t + 1) {
                        let gblk = g.slice(s![t * b..(t + 1) * b, ..]);
                        let ublk = uv.slice(s![(t - j) * b..(t - j + 1) * b, ..]);
                        let mut dst = gw.row_mut(j);
                        dst += &(&gblk * &ublk).sum_axis(Axis(0));
                    }
                }
                gw
            });
            let gb = ctx.needs[2].then(|| g.sum_axis(Axis(0)).insert_axis(Axis(0)));
            vec![gu, gw, gb]
        }))
    }

    /// Elman recurrence `h_t = tanh(x_t + h_{t-1} U)` with zero initial state.
    /// `x_pre` already contains the input projection and bias.
    pub fn rnn_tanh(&self, x_pre: Var, u: Var, layout: SeqLayout) -> Var {
        let out = self.with_value(x_pre, |xv| self.with_value(u, |uv| {
            let (rows, hdim) = xv.dim();
            assert_eq!(rows, layout.rows(), "rnn_tanh row count mismatch");
            assert_eq!(uv.dim(), (hdim, hdim), "rnn_tanh recurrent weight shape");
            let b = layout.n_seq;
            let mut h = Array2::zeros((rows, hdim));
            let mut hprev = Array2::zeros((b, hdim));
            for t in 0..layout.len {
                let mut step = hprev.dot(uv);
                step += &xv.slice(s![t * b..(t + 1) * b, ..]);
                step.mapv_inplace(f64::tanh);
                h.slice_mut(s![t * b..(t + 1) * b, ..]).assign(&step);
                hprev = step;
            }
            h
        }));
        self.push_op(out, vec![x_pre.0, u.0], Box::new(move |ctx| {
            let h = ctx.value;
            let uv = &ctx.parents[1];
            let b = layout.n_seq;
            let hdim = h.ncols();
            let mut gx = Array2::zeros(h.dim());
            let mut gu = Array2::zeros((hdim, hdim));
            let mut carry = Array2::zeros((b, hdim));
            for t in (0..layout.len).rev() {
                let block = s![t * b..(t + 1) * b, ..];
                let mut ga = ctx.upstream.slice(block).to_owned();
                ga += &carry;
                let ht = h.slice(block);
                ga.zip_mut_with(&ht, |g, &y| *g *= 1.0 - y * y);
                if t > 0 {
                    let hprev = h.slice(s![(t - 1) * b..t * b, ..]);
                    gu += &hprev.t().dot(&ga);
                    carry = ga.dot(&uv.t());
                } else {
                    carry.fill(0.0);
                }
                gx.slice_mut(block).assign(&ga);
            }
            vec![Some(gx), Some(gu)]
        }))
    }

    /// Single-gate recurrent cell ("light GRU"):
    /// `z_t = sigmoid(xz_t + h_{t-1} Uz)`, `c_t = tanh(xc_t + h_{t-1} Uc)`,
    /// `h_t = (1 - z_t) h_{t-1} + z_t c_t`, zero initial state. The input
    /// projections (and biases) are precomputed into `xz` and `xc`.
    pub fn rnn_gru(&self, xz: Var, xc: Var, uz: Var, uc: Var, layout: SeqLayout) -> Var {
        let (h, zbuf, cbuf) = self.with_value(xz, |xzv| {
            self.with_value(xc, |xcv| {
                self.with_value(uz, |uzv| self.with_value(uc, |ucv| {
                    let (rows, hdim) = xzv.dim();
                    assert_eq!(xcv.dim(), (rows, hdim), "rnn_gru xz/xc shape mismatch");
                    assert_eq!(rows, layout.rows(), "rnn_gru row count mismatch");
                    assert_eq!(uzv.dim(), (hdim, hdim), "rnn_gru Uz shape");
                    assert_eq!(ucv.dim(), (hdim, hdim), "rnn_gru Uc shape");
                    let b = layout.n_seq;
                    let mut h = Array2::zeros((rows, hdim));
                    let mut zbuf = Array2::zeros((rows, hdim));
                    let mut cbuf = Array2::zeros((rows, hdim));
                    let mut hprev = Array2::<f64>::zeros((b, hdim));
                    for t in 0..layout.len {
                        let block = s![t * b..(t + 1) * b, ..];
                        let mut z = hprev.dot(uzv);
                        z += &xzv.slice(block);
                        z.mapv_inplace(|x| {
                            if x >= 0.0 {
                                1.0 / (1.0 + (-x).exp())
                            } else {
                                let e = x.exp();
                                e / (1.0 + e)
                            }
                        });
                        let mut c = hprev.dot(ucv);
                        c += &xcv.slice(block);
                        c.mapv_inplace(f64::tanh);
                        let mut hnew = hprev.clone();
                        // h = hprev + z * (c - hprev)
                        ndarray::Zip::from(&mut hnew).and(&z).and(&c).for_each(
                            |hv, &zv, &cv| *hv += zv * (cv - *hv),
                        );
                        h.slice_mut(block).assign(&hnew);
                        zbuf.slice_mut(block).assign(&z);
                        cbuf.slice_mut(block).assign(&c);
                        hprev = hnew;
                    }
                    (h, zbuf, cbuf)
                }))
            })
        });
        self.push_op(h, vec![xz.0, xc.0, uz.0, uc.0], Box::new(move |ctx| {
            let h = ctx.value;
            let uzv = &ctx.parents[2];
            let ucv = &ctx.parents[3];
            let b = layout.n_seq;
            let hdim = h.ncols();
            let mut gxz = Array2::zeros(h.dim());
            let mut gxc = Array2::zeros(h.dim());
            let mut guz = Array2::zeros((hdim, hdim));
            let mut guc = Array2::zeros((hdim, hdim));
            let mut carry = Array2::<f64>::zeros((b, hdim));
            let zero_prev = Array2::<f64>::zeros((b, hdim));
            for t in (0..layout.len).rev() {
                let block = s![t * b..(t + 1) * b, ..];
                let mut gh = ctx.upstream.slice(block).to_owned();
                gh += &carry;
                let z = zbuf.slice(block);
                let c = cbuf.slice(block);
                let hprev = if t > 0 {
                    h.slice(s![(t - 1) * b..t * b, ..])
                } else {
                    zero_prev.view()
                };
                // pre-activation grads for both gates
                let mut gaz = Array2::zeros((b, hdim));
                let mut gac = Array2::zeros((b, hdim));
                ndarray::Zip::from(&mut gaz)
                    .and(&mut gac)
                    .and(&gh)
                    .and(&z)
                    .and(&c)
                    .and(&hprev)
                    .for_each(|az, ac, &g, &zv, &cv, &hp| {
                        *az = g * (cv - hp) * zv * (1.0 - zv);
                        *ac = g * zv * (1.0 - cv * cv);
                    });
                gxz.slice_mut(block).assign(&gaz);
                gxc.slice_mut(block).assign(&gac);
                if t > 0 {
                    guz += &hprev.t().dot(&gaz);
                    guc += &hprev.t().dot(&gac);
                    let mut next = gaz.dot(&uzv.t());
                    next += &gac.dot(&ucv.t());
                    ndarray::Zip::from(&mut next).and(&gh).and(&z).for_each(
                        |n, &g, &zv| *n += g * (1.0 - zv),
                    );
                    carry = next;
                } else {
                    carry.fill(0.0);
                }
            }
            vec![Some(gxz), Some(gxc), Some(guz), Some(guc)]
        }))
    }

    /// Discretized decay factors `exp(delta[r, d] * a[d, n])`, flattened to
    /// `(rows, D*N)` with n fastest.
    pub fn delta_a_exp(&self, delta: Var, a: Var) -> Var {
        let out = self.with_value(delta, |dv| self.with_value(a, |av| {
            let (rows, d) = dv.dim();
            let (da, n) = av.dim();
            assert_eq!(d, da, "delta_a_exp channel mismatch");
            let mut y = Array2::zeros((rows, d * n));
            for r in 0..rows {
                let drow = dv.row(r);
                let yrow = y.row_mut(r).into_slice().unwrap();
                for di in 0..d {
                    let dval = drow[di];
                    let arow = av.row(di);
                    let dst = &mut yrow[di * n..(di + 1) * n];
                    for (y_el, &a_el) in dst.iter_mut().zip(arow.iter()) {
                        *y_el = (dval * a_el).exp();
                    }
                }
            }
            y
        }));
        self.push_op(out, vec![delta.0, a.0], Box::new(|ctx| {
            let dv = &ctx.parents[0];
            let av = &ctx.parents[1];
            let (rows, d) = dv.dim();
            let n = av.ncols();
            let need_d = ctx.needs[0];
            let need_a = ctx.needs[1];
            let mut gd = need_d.then(|| Array2::zeros((rows, d)));
            let mut ga = need_a.then(|| Array2::zeros((d, n)));
            for r in 0..rows {
                let grow = ctx.upstream.row(r);
                let grow = grow.as_slice().unwrap();
                let yrow = ctx.value.row(r);
                let yrow = yrow.as_slice().unwrap();
                for di in 0..d {
                    let arow = av.row(di);
                    let gy = &grow[di * n..(di + 1) * n];
                    let yy = &yrow[di * n..(di + 1) * n];
                    if let Some(gd) = gd.as_mut() {
                        let mut acc = 0.0;
                        for k in 0..n {
                            acc += gy[k] * arow[k] * yy[k];
                        }
                        gd[[r, di]] = acc;
                    }
                    if let Some(ga) = ga.as_mut() {
                        let dval = dv[[r, di]];
                        let mut dst = ga.row_mut(di);
                        for k in 0..n {
                            dst[k] += gy[k] * dval * yy[k];
                        }
                    }
                }
            }
            vec![gd, ga]
        }))
    }

    /// Per-row outer product `x[r, d] * y[r, n]`, flattened to `(rows, D*N)`.
    pub fn outer_mul(&self, x: Var, y: Var) -> Var {
        let out = self.with_value(x, |xv| self.with_value(y, |yv| {
            let (rows, d) = xv.dim();
            let (ry, n) = yv.dim();
            assert_eq!(rows, ry, "outer_mul row mismatch");
            let mut out = Array2::zeros((rows, d * n));
            for r in 0..rows {
                let xrow = xv.row(r);
                let yrow = yv.row(r);
                let yrow = yrow.as_slice().unwrap();
                let orow = out.row_mut(r).into_slice().unwrap();
                for di in 0..d {
                    let xval = xrow[di];
                    let dst = &mut orow[di * n..(di + 1) * n];
                    for (o, &y_el) in dst.iter_mut().zip(yrow.iter()) {
                        *o = xval * y_el;
                    }
                }
            }
            out
        }));
        self.push_op(out, vec![x.0, y.0], Box::new(|ctx| {
            let xv = &ctx.parents[0];
            let yv = &ctx.parents[1];
            let (rows, d) = xv.dim();
            let n = yv.ncols();
            let mut gx = ctx.needs[0].then(|| Array2::zeros((rows, d)));
            let mut gy = ctx.needs[1].then(|| Array2::zeros((rows, n)));
            for r in 0..rows {
                let grow = ctx.upstream.row(r);
                let grow = grow.as_slice().unwrap();
                for di in 0..d {
                    let gblk = &grow[di * n..(di + 1) * n];
                    if let Some(gx) = gx.as_mut() {
                        let yrow = yv.row(r);
                        let mut acc = 0.0;
                        for k in 0..n {
                            acc += gblk[k] * yrow[k];
                        }
                        gx[[r, di]] = acc;
                    }
                    if let Some(gy) = gy.as_mut() {
                        let xval = xv[[r, di]];
                        let mut dst = gy.row_mut(r);
                        for k in 0..n {
                            dst[k] += gblk[k] * xval;
                        }
                    }
                }
            }
            vec![gx, gy]
        }))
    }

    /// Gated linear recurrence `h_t = a_t * h_{t-1} + b_t` applied per column,
    /// with zero initial state. With `a_t = 0` the output is exactly `b_t`.
    pub fn linear_scan(&self, a: Var, b: Var, layout: SeqLayout) -> Var {
        let out = self.with_value(a, |av| self.with_value(b, |bv| {
            assert_eq!(av.dim(), bv.dim(), "linear_scan shape mismatch");
            assert_eq!(av.nrows(), layout.rows(), "linear_scan row count mismatch");
            let nb = layout.n_seq;
            let width = av.ncols();
            let mut h = Array2::zeros(av.dim());
            let mut hprev = Array2::<f64>::zeros((nb, width));
            for t in 0..layout.len {
                let block = s![t * nb..(t + 1) * nb, ..];
                let mut step = av.slice(block).to_owned();
                step *= &hprev;
                step += &bv.slice(block);
                h.slice_mut(block).assign(&step);
                hprev = step;
            }
            h
        }));
        self.push_op(out, vec![a.0, b.0], Box::new(move |ctx| {
            let av = &ctx.parents[0];
            let h = ctx.value;
            let nb = layout.n_seq;
            let width = av.ncols();
            let mut ga = ctx.needs[0].then(|| Array2::zeros(av.dim()));
            let mut gb = Array2::zeros(av.dim());
            let mut lam = Array2::<f64>::zeros((nb, width));
            for t in (0..layout.len).rev() {
                let block = s![t * nb..(t + 1) * nb, ..];
                lam += &ctx.upstream.slice(block);
                gb.slice_mut(block).assign(&lam);
                if let Some(ga) = ga.as_mut() {
                    if t > 0 {
                        let hprev = h.slice(s![(t - 1) * nb..t * nb, ..]);
                        let mut dst = ga.slice_mut(block);
                        dst.assign(&lam);
                        dst *= &hprev;
                    }
                }
                // carry to step t-1: lam = lam * a_t
                lam *= &av.slice(block);
            }
            vec![ga, Some(gb)]
        }))
    }

    /// Contract the state dimension: `o[r, d] = sum_n h[r, d*N+n] * c[r, n]`.
    pub fn state_contract(&self, h: Var, c: Var) -> Var {
        let out = self.with_value(h, |hv| self.with_value(c, |cv| {
            let (rows, dn) = hv.dim();
            let (rc, n) = cv.dim();
            assert_eq!(rows, rc, "state_contract row mismatch");
            assert_eq!(dn % n, 0, "state_contract width not divisible by state dim");
            let d = dn / n;
            let mut o = Array2::zeros((rows, d));
            for r in 0..rows {
                let hrow = hv.row(r);
                let hrow = hrow.as_slice().unwrap();
                let crow = cv.row(r);
                let crow = crow.as_slice().unwrap();
                let orow = o.row_mut(r).into_slice().unwrap();
                for di in 0..d {
                    let blk = &hrow[di * n..(di + 1) * n];
                    let mut acc = 0.0;
                    for k in 0..n {
                        acc += blk[k] * crow[k];
                    }
                    orow[di] = acc;
                }
            }
            o
        }));
        self.push_op(out, vec![h.0, c.0], Box::new(|ctx| {
            let hv = &ctx.parents[0];
            let cv = &ctx.parents[1];
            let (rows, dn) = hv.dim();
            let n = cv.ncols();
            let d = dn / n;
            let mut gh = ctx.needs[0].then(|| Array2::zeros((rows, dn)));
            let mut gc = ctx.needs[1].then(|| Array2::zeros((rows, n)));
            for r in 0..rows {
                let grow = ctx.upstream.row(r);
                let grow = grow.as_slice().unwrap();
                if let Some(gh) = gh.as_mut() {
                    let crow = cv.row(r);
                    let crow = crow.as_slice().unwrap();
                    let ghrow = gh.row_mut(r).into_slice().unwrap();
                    for di in 0..d {
                        let go = grow[di];
                        let dst = &mut ghrow[di * n..(di + 1) * n];
                        for k in 0..n {
                            dst[k] = go * crow[k];
                        }
                    }
                }
                if let Some(gc) = gc.as_mut() {
                    let hrow = hv.row(r);
                    let hrow = hrow.as_slice().unwrap();
                    let gcrow = gc.row_mut(r).into_slice().unwrap();
                    for di in 0..d {
                        let go = grow[di];
                        let blk = &hrow[di * n..(di + 1) * n];
                        for k in 0..n {
                            gcrow[k] += go * blk[k];
                        }
                    }
                }
            }
            vec![gh, gc]
        }))
    }

    /// Mean over time per sequence: (len*n_seq, D) -> (n_seq, D).
    pub fn seq_mean(&self, x: Var, layout: SeqLayout) -> Var {
        let out = self.with_value(x, |xv| {
            assert_eq!(xv.nrows(), layout.rows(), "seq_mean row count mismatch");
            let mut y = Array2::zeros((layout.n_seq, xv.ncols()));
            for t in 0..layout.len {
                y += &xv.slice(s![t * layout.n_seq..(t + 1) * layout.n_seq, ..]);
            }
            y /= layout.len as f64;
            y
        });
        self.push_op(out, vec![x.0], Box::new(move |ctx| {
            let scale = 1.0 / layout.len as f64;
            let mut g = Array2::zeros((layout.rows(), ctx.upstream.ncols()));
            for t in 0..layout.len {
                let mut dst = g.slice_mut(s![t * layout.n_seq..(t + 1) * layout.n_seq, ..]);
                dst.assign(ctx.upstream);
                dst *= scale;
            }
            vec![Some(g)]
        }))
    }

    /// Rearrange a time-major column (len*n_seq, 1) into (n_seq, len), e.g. to
    /// softmax attention scores per sequence.
    pub fn seq_scores_to_mat(&self, x: Var, layout: SeqLayout) -> Var {
        let out = self.with_value(x, |xv| {
            assert_eq!(xv.dim(), (layout.rows(), 1), "seq_scores_to_mat wants a column");
            let mut y = Array2::zeros((layout.n_seq, layout.len));
            for t in 0..layout.len {
                for b in 0..layout.n_seq {
                    y[[b, t]] = xv[[layout.row(t, b), 0]];
                }
            }
            y
        });
        self.push_op(out, vec![x.0], Box::new(move |ctx| {
            let mut g = Array2::zeros((layout.rows(), 1));
            for t in 0..layout.len {
                for b in 0..layout.n_seq {
                    g[[layout.row(t, b), 0]] = ctx.upstream[[b, t]];
                }
            }
            vec![Some(g)]
        }))
    }

    /// Weighted sum over time per sequence: with weights (n_seq, len) and
    /// features (len*n_seq, D), produce (n_seq, D).
    pub fn seq_weighted_sum(&self, x: Var, w: Var, layout: SeqLayout) -> Var {
        let out = self.with_value(x, |xv| self.with_value(w, |wv| {
            assert_eq!(xv.nrows(), layout.rows(), "seq_weighted_sum row count mismatch");
            assert_eq!(wv.dim(), (layout.n_seq, layout.len), "seq_weighted_sum weight shape");
            let mut y = Array2::zeros((layout.n_seq, xv.ncols()));
            for t in 0..layout.len {
                for b in 0..layout.n_seq {
                    let src = xv.row(layout.row(t, b));
                    let weight = wv[[b, t]];
                    let mut dst = y.row_mut(b);
                    dst.zip_mut_with(&src, |d, &s| *d += weight * s);
                }
            }
            y
        }));
        self.push_op(out, vec![x.0, w.0], Box::new(move |ctx| {
            let xv = &ctx.parents[0];
            let wv = &ctx.parents[1];
            let gx = ctx.needs[0].then(|| {
                let mut gx = Array2::zeros(xv.dim());
                for t in 0..layout.len {
                    for b in 0..layout.n_seq {
                        let gr = ctx.upstream.row(b);
                        let weight = wv[[b, t]];
                        let mut dst = gx.row_mut(layout.row(t, b));
                        dst.zip_mut_with(&gr, |d, &s| *d = weight * s);
                    }
                }
                gx
            });
            let gw = ctx.needs[1].then(|| {
                let mut gw = Array2::zeros((layout.n_seq, layout.len));
                for t in 0..layout.len {
                    for b in 0..layout.n_seq {
                        let xr = xv.row(layout.row(t, b));
                        let gr = ctx.upstream.row(b);
                        gw[[b, t]] = xr.iter().zip(gr.iter()).map(|(a, g)| a * g).sum();
                    }
                }
                gw
            });
            vec![gx, gw]
        }))
    }

    /// Broadcast one vector per sequence across all its time steps:
    /// (n_seq, D) -> (len*n_seq, D).
    pub fn seq_broadcast(&self, x: Var, layout: SeqLayout) -> Var {
        let out = self.with_value(x, |xv| {
            assert_eq!(xv.nrows(), layout.n_seq, "seq_broadcast row count mismatch");
            let mut y = Array2::zeros((layout.rows(), xv.ncols()));
            for t in 0..layout.len {
                y.slice_mut(s![t * layout.n_seq..(t + 1) * layout.n_seq, ..])
                    .assign(xv);
            }
            y
        });
        self.push_op(out, vec![x.0], Box::new(move |ctx| {
            let cols = ctx.upstream.ncols();
            let mut g = Array2::zeros((layout.n_seq, cols));
            for t in 0..layout.len {
                g += &ctx
                    .upstream
                    .slice(s![t * layout.n_seq..(t + 1) * layout.n_seq, ..]);
            }
            vec![Some(g)]
        }))
    }
}
