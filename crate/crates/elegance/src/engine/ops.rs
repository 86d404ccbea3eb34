//! Dense, elementwise, reduction, and shape ops. Shapes are asserted eagerly
//! so a misuse fails at the call site instead of deep inside `backward`.

use super::{Tape, Var};
use ndarray::{s, Array2, Axis};

fn sigmoid_scalar(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl Tape {
    // ---- arithmetic ----

    pub fn add(&self, a: Var, b: Var) -> Var {
        let out = self.with_value(a, |av| self.with_value(b, |bv| {
            assert_eq!(av.dim(), bv.dim(), "add shape mismatch");
            av + bv
        }));
        self.push_op(out, vec![a.0, b.0], Box::new(|ctx| {
            vec![
                ctx.needs[0].then(|| ctx.upstream.clone()),
                ctx.needs[1].then(|| ctx.upstream.clone()),
            ]
        }))
    }

    pub fn sub(&self, a: Var, b: Var) -> Var {
        let out = self.with_value(a, |av| self.with_value(b, |bv| {
            assert_eq!(av.dim(), bv.dim(), "sub shape mismatch");
            av - bv
        }));
        self.push_op(out, vec![a.0, b.0], Box::new(|ctx| {
            vec![
                ctx.needs[0].then(|| ctx.upstream.clone()),
                ctx.needs[1].then(|| -ctx.upstream),
            ]
        }))
    }

    pub fn mul(&self, a: Var, b: Var) -> Var {
        let out = self.with_value(a, |av| self.with_value(b, |bv| {
            assert_eq!(av.dim(), bv.dim(), "mul shape mismatch");
            av * bv
        }));
        self.push_op(out, vec![a.0, b.0], Box::new(|ctx| {
            vec![
                ctx.needs[0].then(|| ctx.upstream * &ctx.parents[1]),
                ctx.needs[1].then(|| ctx.upstream * &ctx.parents[0]),
            ]
        }))
    }

    pub fn div(&self, a: Var, b: Var) -> Var {
        let out = self.with_value(a, |av| self.with_value(b, |bv| {
            assert_eq!(av.dim(), bv.dim(), "div shape mismatch");
            av / bv
        }));
        self.push_op(out, vec![a.0, b.0], Box::new(|ctx| {
            vec![
                ctx.needs[0].then(|| ctx.upstream / &ctx.parents[1]),
                ctx.needs[1].then(|| -(ctx.upstream * ctx.value) / &ctx.parents[1]),
            ]
        }))
    }

    pub fn neg(&self, a: Var) -> Var {
        let out = self.with_value(a, |av| -av);
        self.push_op(out, vec![a.0], Box::new(|ctx| vec![Some(-ctx.upstream)]))
    }

    pub fn scale(&self, a: Var, c: f64) -> Var {
        let out = self.with_value(a, |av| av * c);
        self.push_op(out, vec![a.0], Box::new(move |ctx| vec![Some(ctx.upstream * c)]))
    }

    pub fn add_const(&self, a: Var, c: f64) -> Var {
        let out = self.with_value(a, |av| av + c);
        self.push_op(out, vec![a.0], Box::new(|ctx| vec![Some(ctx.upstream.clone())]))
    }

    /// `c - a` with a scalar constant.
    pub fn const_sub(&self, c: f64, a: Var) -> Var {
        let out = self.with_value(a, |av| c - av);
        self.push_op(out, vec![a.0], Box::new(|ctx| vec![Some(-ctx.upstream)]))
    }

    pub fn matmul(&self, a: Var, b: Var) -> Var {
        let out = self.with_value(a, |av| self.with_value(b, |bv| {
            assert_eq!(av.ncols(), bv.nrows(), "matmul inner dim mismatch");
            av.dot(bv)
        }));
        self.push_op(out, vec![a.0, b.0], Box::new(|ctx| {
            vec![
                ctx.needs[0].then(|| ctx.upstream.dot(&ctx.parents[1].t())),
                ctx.needs[1].then(|| ctx.parents[0].t().dot(ctx.upstream)),
            ]
        }))
    }

    /// Add a 1xN bias row to every row of `a`.
    pub fn add_row(&self, a: Var, bias: Var) -> Var {
        let out = self.with_value(a, |av| self.with_value(bias, |bv| {
            assert_eq!(bv.nrows(), 1, "bias must be a single row");
            assert_eq!(av.ncols(), bv.ncols(), "bias width mismatch");
            av + bv
        }));
        self.push_op(out, vec![a.0, bias.0], Box::new(|ctx| {
            vec![
                ctx.needs[0].then(|| ctx.upstream.clone()),
                ctx.needs[1].then(|| {
                    ctx.upstream
                        .sum_axis(Axis(0))
                        .insert_axis(Axis(0))
                        .to_owned()
                }),
            ]
        }))
    }

    pub fn transpose(&self, a: Var) -> Var {
        let out = self.with_value(a, |av| av.t().to_owned());
        self.push_op(out, vec![a.0], Box::new(|ctx| vec![Some(ctx.upstream.t().to_owned())]))
    }

    // ---- elementwise maps ----

    pub fn relu(&self, a: Var) -> Var {
        let out = self.with_value(a, |av| av.mapv(|x| x.max(0.0)));
        self.push_op(out, vec![a.0], Box::new(|ctx| {
            let mut g = ctx.upstream.clone();
            g.zip_mut_with(&ctx.parents[0], |gi, &x| {
                if x <= 0.0 {
                    *gi = 0.0;
                }
            });
            vec![Some(g)]
        }))
    }

    pub fn sigmoid(&self, a: Var) -> Var {
        let out = self.with_value(a, |av| av.mapv(sigmoid_scalar));
        self.push_op(out, vec![a.0], Box::new(|ctx| {
            let mut g = ctx.upstream.clone();
            g.zip_mut_with(ctx.value, |gi, &y| *gi *= y * (1.0 - y));
            vec![Some(g)]
        }))
    }

    pub fn tanh(&self, a: Var) -> Var {
        let out = self.with_value(a, |av| av.mapv(f64::tanh));
        self.push_op(out, vec![a.0], Box::new(|ctx| {
            let mut g = ctx.upstream.clone();
            g.zip_mut_with(ctx.value, |gi, &y| *gi *= 1.0 - y * y);
            vec![Some(g)]
        }))
    }

    pub fn softplus(&self, a: Var) -> Var {
        let out = self.with_value(a, |av| av.mapv(|x| {
            if x > 30.0 {
                x
            } else {
                x.exp().ln_1p()
            }
        }));
        self.push_op(out, vec![a.0], Box::new(|ctx| {
            let mut g = ctx.upstream.clone();
            g.zip_mut_with(&ctx.parents[0], |gi, &x| *gi *= sigmoid_scalar(x));
            vec![Some(g)]
        }))
    }

    pub fn silu(&self, a: Var) -> Var {
        let out = self.with_value(a, |av| av.mapv(|x| x * sigmoid_scalar(x)));
        self.push_op(out, vec![a.0], Box::new(|ctx| {
            let mut g = ctx.upstream.clone();
            g.zip_mut_with(&ctx.parents[0], |gi, &x| {
                let s = sigmoid_scalar(x);
                *gi *= s * (1.0 + x * (1.0 - s));
            });
            vec![Some(g)]
        }))
    }

    pub fn square(&self, a: Var) -> Var {
        let out = self.with_value(a, |av| av.mapv(|x| x * x));
        self.push_op(out, vec![a.0], Box::new(|ctx| {
            vec![Some(ctx.upstream * &ctx.parents[0] * 2.0)]
        }))
    }

    /// Natural log; the caller guarantees strictly positive inputs.
    pub fn ln(&self, a: Var) -> Var {
        let out = self.with_value(a, |av| av.mapv(f64::ln));
        self.push_op(out, vec![a.0], Box::new(|ctx| {
            vec![Some(ctx.upstream / &ctx.parents[0])]
        }))
    }

    pub fn exp(&self, a: Var) -> Var {
        let out = self.with_value(a, |av| av.mapv(f64::exp));
        self.push_op(out, vec![a.0], Box::new(|ctx| {
            vec![Some(ctx.upstream * ctx.value)]
        }))
    }

    // ---- reductions ----

    pub fn sum_all(&self, a: Var) -> Var {
        let out = self.with_value(a, |av| Array2::from_elem((1, 1), av.sum()));
        self.push_op(out, vec![a.0], Box::new(|ctx| {
            let g = ctx.upstream[[0, 0]];
            vec![Some(Array2::from_elem(ctx.parents[0].dim(), g))]
        }))
    }

    pub fn mean_all(&self, a: Var) -> Var {
        let out = self.with_value(a, |av| {
            Array2::from_elem((1, 1), av.sum() / av.len() as f64)
        });
        self.push_op(out, vec![a.0], Box::new(|ctx| {
            let n = ctx.parents[0].len() as f64;
            let g = ctx.upstream[[0, 0]] / n;
            vec![Some(Array2::from_elem(ctx.parents[0].dim(), g))]
        }))
    }

    /// Full contraction `sum(a * b)` as a 1x1 node.
    pub fn dot_all(&self, a: Var, b: Var) -> Var {
        let out = self.with_value(a, |av| self.with_value(b, |bv| {
            assert_eq!(av.dim(), bv.dim(), "dot_all shape mismatch");
            Array2::from_elem((1, 1), (av * bv).sum())
        }));
        self.push_op(out, vec![a.0, b.0], Box::new(|ctx| {
            let g = ctx.upstream[[0, 0]];
            vec![
                ctx.needs[0].then(|| ctx.parents[1].to_owned() * g),
                ctx.needs[1].then(|| ctx.parents[0].to_owned() * g),
            ]
        }))
    }

    /// Column-wise sum: (m, n) -> (1, n).
    pub fn col_sum(&self, a: Var) -> Var {
        let out = self.with_value(a, |av| av.sum_axis(Axis(0)).insert_axis(Axis(0)).to_owned());
        self.push_op(out, vec![a.0], Box::new(|ctx| {
            let (m, _) = ctx.parents[0].dim();
            vec![Some(
                ctx.upstream
                    .broadcast((m, ctx.upstream.ncols()))
                    .unwrap()
                    .to_owned(),
            )]
        }))
    }

    /// Column-wise mean: (m, n) -> (1, n).
    pub fn col_mean(&self, a: Var) -> Var {
        let m = self.dims(a).0;
        let s = self.col_sum(a);
        self.scale(s, 1.0 / m as f64)
    }

    /// Row-wise mean: (m, n) -> (m, 1).
    pub fn row_mean(&self, a: Var) -> Var {
        let out = self.with_value(a, |av| {
            av.mean_axis(Axis(1)).unwrap().insert_axis(Axis(1)).to_owned()
        });
        self.push_op(out, vec![a.0], Box::new(|ctx| {
            let (m, n) = ctx.parents[0].dim();
            vec![Some(ctx.upstream.broadcast((m, n)).unwrap().to_owned() / n as f64)]
        }))
    }

    /// Row-wise dot product: (m, n) x (m, n) -> (m, 1).
    pub fn row_dot(&self, a: Var, b: Var) -> Var {
        let out = self.with_value(a, |av| self.with_value(b, |bv| {
            assert_eq!(av.dim(), bv.dim(), "row_dot shape mismatch");
            (av * bv)
                .sum_axis(Axis(1))
                .insert_axis(Axis(1))
                .to_owned()
        }));
        self.push_op(out, vec![a.0, b.0], Box::new(|ctx| {
            // upstream is (m, 1); put the full-width operand on the left so
            // ndarray broadcasts the column across it.
            vec![
                ctx.needs[0].then(|| &ctx.parents[1] * ctx.upstream),
                ctx.needs[1].then(|| &ctx.parents[0] * ctx.upstream),
            ]
        }))
    }

    /// Scale each row i of `a` by `c[i, 0]`.
    pub fn mul_col(&self, a: Var, c: Var) -> Var {
        let out = self.with_value(a, |av| self.with_value(c, |cv| {
            assert_eq!(cv.ncols(), 1, "mul_col scale must be a column");
            assert_eq!(av.nrows(), cv.nrows(), "mul_col row mismatch");
            av * cv
        }));
        self.push_op(out, vec![a.0, c.0], Box::new(|ctx| {
            vec![
                ctx.needs[0].then(|| ctx.upstream * &ctx.parents[1]),
                ctx.needs[1].then(|| {
                    (ctx.upstream * &ctx.parents[0])
                        .sum_axis(Axis(1))
                        .insert_axis(Axis(1))
                        .to_owned()
                }),
            ]
        }))
    }

    /// Subtract `c[i, 0]` from each row i of `a`.
    pub fn sub_col(&self, a: Var, c: Var) -> Var {
        let out = self.with_value(a, |av| self.with_value(c, |cv| {
            assert_eq!(cv.ncols(), 1, "sub_col offset must be a column");
            assert_eq!(av.nrows(), cv.nrows(), "sub_col row mismatch");
            av - cv
        }));
        self.push_op(out, vec![a.0, c.0], Box::new(|ctx| {
            vec![
                ctx.needs[0].then(|| ctx.upstream.clone()),
                ctx.needs[1].then(|| {
                    -ctx.upstream
                        .sum_axis(Axis(1))
                        .insert_axis(Axis(1))
                        .to_owned()
                }),
            ]
        }))
    }

    /// Subtract a 1x1 scalar node from every element.
    pub fn sub_scalar(&self, a: Var, s: Var) -> Var {
        let out = self.with_value(a, |av| self.with_value(s, |sv| {
            assert_eq!(sv.dim(), (1, 1), "sub_scalar needs a 1x1 node");
            av - sv[[0, 0]]
        }));
        self.push_op(out, vec![a.0, s.0], Box::new(|ctx| {
            vec![
                ctx.needs[0].then(|| ctx.upstream.clone()),
                ctx.needs[1].then(|| Array2::from_elem((1, 1), -ctx.upstream.sum())),
            ]
        }))
    }

    /// Multiply every element by a 1x1 scalar node.
    pub fn mul_scalar(&self, a: Var, s: Var) -> Var {
        let out = self.with_value(a, |av| self.with_value(s, |sv| {
            assert_eq!(sv.dim(), (1, 1), "mul_scalar needs a 1x1 node");
            av * sv[[0, 0]]
        }));
        self.push_op(out, vec![a.0, s.0], Box::new(|ctx| {
            vec![
                ctx.needs[0].then(|| ctx.upstream * ctx.parents[1][[0, 0]]),
                ctx.needs[1].then(|| {
                    Array2::from_elem((1, 1), (ctx.upstream * &ctx.parents[0]).sum())
                }),
            ]
        }))
    }

    // ---- row-stable softmax family ----

    pub fn softmax_rows(&self, a: Var) -> Var {
        let out = self.with_value(a, |av| {
            let mut y = av.clone();
            for mut row in y.rows_mut() {
                let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                row.mapv_inplace(|x| (x - max).exp());
                let sum = row.sum();
                row.mapv_inplace(|x| x / sum);
            }
            y
        });
        self.push_op(out, vec![a.0], Box::new(|ctx| {
            let y = ctx.value;
            let mut g = ctx.upstream.clone();
            for (mut grow, yrow) in g.rows_mut().into_iter().zip(y.rows()) {
                let dot: f64 = grow.iter().zip(yrow.iter()).map(|(gi, yi)| gi * yi).sum();
                grow.zip_mut_with(&yrow, |gi, &yi| *gi = yi * (*gi - dot));
            }
            vec![Some(g)]
        }))
    }

    pub fn log_softmax_rows(&self, a: Var) -> Var {
        let out = self.with_value(a, |av| {
            let mut y = av.clone();
            for mut row in y.rows_mut() {
                let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let lse = row.iter().map(|x| (x - max).exp()).sum::<f64>().ln() + max;
                row.mapv_inplace(|x| x - lse);
            }
            y
        });
        self.push_op(out, vec![a.0], Box::new(|ctx| {
            let mut g = ctx.upstream.clone();
            for (mut grow, yrow) in g.rows_mut().into_iter().zip(ctx.value.rows()) {
                let gsum: f64 = grow.sum();
                grow.zip_mut_with(&yrow, |gi, &yi| *gi -= yi.exp() * gsum);
            }
            vec![Some(g)]
        }))
    }

    /// Gather `a[i, idx[i]]` into a column: (m, n) -> (m, 1).
    pub fn pick_per_row(&self, a: Var, idx: Vec<usize>) -> Var {
        let out = self.with_value(a, |av| {
            assert_eq!(av.nrows(), idx.len(), "pick_per_row index count mismatch");
            let mut col = Array2::zeros((idx.len(), 1));
            for (i, &j) in idx.iter().enumerate() {
                col[[i, 0]] = av[[i, j]];
            }
            col
        });
        self.push_op(out, vec![a.0], Box::new(move |ctx| {
            let mut g = Array2::zeros(ctx.parents[0].dim());
            for (i, &j) in idx.iter().enumerate() {
                g[[i, j]] = ctx.upstream[[i, 0]];
            }
            vec![Some(g)]
        }))
    }

    // ---- shape plumbing ----

    pub fn concat_cols(&self, a: Var, b: Var) -> Var {
        let out = self.with_value(a, |av| self.with_value(b, |bv| {
            assert_eq!(av.nrows(), bv.nrows(), "concat_cols row mismatch");
            ndarray::concatenate(Axis(1), &[av.view(), bv.view()]).unwrap()
        }));
        self.push_op(out, vec![a.0, b.0], Box::new(|ctx| {
            let na = ctx.parents[0].ncols();
            vec![
                ctx.needs[0].then(|| ctx.upstream.slice(s![.., ..na]).to_owned()),
                ctx.needs[1].then(|| ctx.upstream.slice(s![.., na..]).to_owned()),
            ]
        }))
    }

    pub fn slice_cols(&self, a: Var, lo: usize, hi: usize) -> Var {
        let out = self.with_value(a, |av| {
            assert!(lo < hi && hi <= av.ncols(), "slice_cols range out of bounds");
            av.slice(s![.., lo..hi]).to_owned()
        });
        self.push_op(out, vec![a.0], Box::new(move |ctx| {
            let mut g = Array2::zeros(ctx.parents[0].dim());
            g.slice_mut(s![.., lo..hi]).assign(ctx.upstream);
            vec![Some(g)]
        }))
    }

    pub fn slice_rows(&self, a: Var, lo: usize, hi: usize) -> Var {
        let out = self.with_value(a, |av| {
            assert!(lo < hi && hi <= av.nrows(), "slice_rows range out of bounds");
            av.slice(s![lo..hi, ..]).to_owned()
        });
        self.push_op(out, vec![a.0], Box::new(move |ctx| {
            let mut g = Array2::zeros(ctx.parents[0].dim());
            g.slice_mut(s![lo..hi, ..]).assign(ctx.upstream);
            vec![Some(g)]
        }))
    }

    pub fn concat_rows_many(&self, parts: &[Var]) -> Var {
        assert!(!parts.is_empty(), "concat_rows_many needs at least one part");
        let out = {
            let nodes = self.nodes.borrow();
            let views: Vec<_> = parts.iter().map(|v| nodes[v.0].value.view()).collect();
            ndarray::concatenate(Axis(0), &views).unwrap()
        };
        let row_counts: Vec<usize> = parts.iter().map(|v| self.dims(*v).0).collect();
        self.push_op(
            out,
            parts.iter().map(|v| v.0).collect(),
            Box::new(move |ctx| {
                let mut grads = Vec::with_capacity(row_counts.len());
                let mut at = 0;
                for (k, &rows) in row_counts.iter().enumerate() {
                    grads.push(
                        ctx.needs[k].then(|| ctx.upstream.slice(s![at..at + rows, ..]).to_owned()),
                    );
                    at += rows;
                }
                grads
            }),
        )
    }

    /// Gather rows by index; an index may repeat.
    pub fn row_select(&self, a: Var, idx: Vec<usize>) -> Var {
        let out = self.with_value(a, |av| {
            debug_assert!(idx.iter().all(|&i| i < av.nrows()));
            av.select(Axis(0), &idx)
        });
        self.push_op(out, vec![a.0], Box::new(move |ctx| {
            let mut g = Array2::zeros(ctx.parents[0].dim());
            for (r, &i) in idx.iter().enumerate() {
                let mut dst = g.row_mut(i);
                dst += &ctx.upstream.row(r);
            }
            vec![Some(g)]
        }))
    }

    /// Scatter rows of `a` into `out_rows` buckets and average contributions.
    /// Every bucket must receive at least one row.
    pub fn row_scatter_avg(&self, a: Var, idx: Vec<usize>, out_rows: usize) -> Var {
        let mut counts = vec![0usize; out_rows];
        for &i in &idx {
            counts[i] += 1;
        }
        assert!(
            counts.iter().all(|&c| c > 0),
            "row_scatter_avg leaves a bucket empty"
        );
        let out = self.with_value(a, |av| {
            assert_eq!(av.nrows(), idx.len(), "row_scatter_avg index count mismatch");
            let mut out = Array2::zeros((out_rows, av.ncols()));
            for (r, &i) in idx.iter().enumerate() {
                let mut dst = out.row_mut(i);
                dst += &av.row(r);
            }
            for (i, mut row) in out.rows_mut().into_iter().enumerate() {
                row /= counts[i] as f64;
            }
            out
        });
        self.push_op(out, vec![a.0], Box::new(move |ctx| {
            let mut g = Array2::zeros(ctx.parents[0].dim());
            for (r, &i) in idx.iter().enumerate() {
                let scale = 1.0 / counts[i] as f64;
                let mut dst = g.row_mut(r);
                dst.assign(&ctx.upstream.row(i));
                dst *= scale;
            }
            vec![Some(g)]
        }))
    }

    /// Repeat a 1xN row m times.
    pub fn broadcast_row(&self, a: Var, m: usize) -> Var {
        let out = self.with_value(a, |av| {
            assert_eq!(av.nrows(), 1, "broadcast_row needs a single row");
            av.broadcast((m, av.ncols())).unwrap().to_owned()
        });
        self.push_op(out, vec![a.0], Box::new(|ctx| {
            vec![Some(
                ctx.upstream
                    .sum_axis(Axis(0))
                    .insert_axis(Axis(0))
                    .to_owned(),
            )]
        }))
    }

    /// Per-row normalization with learned scale and shift (both 1xN).
    pub fn layer_norm(&self, x: Var, gamma: Var, beta: Var, eps: f64) -> Var {
        let (xhat, inv_std, out) = self.with_value(x, |xv| {
            self.with_value(gamma, |gv| self.with_value(beta, |bv| {
                let (m, n) = xv.dim();
                assert_eq!(gv.dim(), (1, n), "layer_norm gamma shape");
                assert_eq!(bv.dim(), (1, n), "layer_norm beta shape");
                let mut xhat = Array2::zeros((m, n));
                let mut inv_std = vec![0.0f64; m];
                for (i, row) in xv.rows().into_iter().enumerate() {
                    let mean = row.sum() / n as f64;
                    let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
                    let is = 1.0 / (var + eps).sqrt();
                    inv_std[i] = is;
                    let mut dst = xhat.row_mut(i);
                    for (d, &v) in dst.iter_mut().zip(row.iter()) {
                        *d = (v - mean) * is;
                    }
                }
                let out = &xhat * gv + bv;
                (xhat, inv_std, out)
            }))
        });
        self.push_op(out, vec![x.0, gamma.0, beta.0], Box::new(move |ctx| {
            let g = ctx.upstream;
            let gamma_row = ctx.parents[1].row(0);
            let (m, n) = g.dim();
            let gx = ctx.needs[0].then(|| {
                let mut gx = Array2::zeros((m, n));
                for i in 0..m {
                    let grow = g.row(i);
                    let xrow = xhat.row(i);
                    let mut ghat = vec![0.0f64; n];
                    for j in 0..n {
                        ghat[j] = grow[j] * gamma_row[j];
                    }
                    let mean_ghat = ghat.iter().sum::<f64>() / n as f64;
                    let mean_gx: f64 =
                        ghat.iter().zip(xrow.iter()).map(|(a, b)| a * b).sum::<f64>() / n as f64;
                    let mut dst = gx.row_mut(i);
                    for j in 0..n {
                        dst[j] = inv_std[i] * (ghat[j] - mean_ghat - xrow[j] * mean_gx);
                    }
                }
                gx
            });
            let ggamma = ctx.needs[1].then(|| {
                (g * &xhat)
                    .sum_axis(Axis(0))
                    .insert_axis(Axis(0))
                    .to_owned()
            });
            let gbeta = ctx.needs[2]
                .then(|| g.sum_axis(Axis(0)).insert_axis(Axis(0)).to_owned());
            vec![gx, ggamma, gbeta]
        }))
    }
}
