//! Elementwise, broadcast, structural and reduction ops.

use ndarray::{ArrayD, Axis, IxDyn, Slice};

use super::graph::{Tape, Var};

/// Standard normal CDF via `erfc` (double-precision accurate in the tails).
pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Standard normal density.
pub fn std_normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

fn stable_softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn stable_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl Tape {
    fn assert_same_shape(&self, a: Var, b: Var, op: &str) {
        debug_assert_eq!(
            self.value(a).shape(),
            self.value(b).shape(),
            "{op}: operand shapes differ"
        );
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        self.assert_same_shape(a, b, "add");
        let out = self.value(a) + self.value(b);
        self.push(
            out,
            Some(Box::new(move |_, g, grads| {
                grads.add(a, g.clone());
                grads.add(b, g.clone());
            })),
        )
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        self.assert_same_shape(a, b, "sub");
        let out = self.value(a) - self.value(b);
        self.push(
            out,
            Some(Box::new(move |_, g, grads| {
                grads.add(a, g.clone());
                grads.add(b, g.mapv(|x| -x));
            })),
        )
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        self.assert_same_shape(a, b, "mul");
        let out = self.value(a) * self.value(b);
        self.push(
            out,
            Some(Box::new(move |t, g, grads| {
                grads.add(a, g * t.value(b));
                grads.add(b, g * t.value(a));
            })),
        )
    }

    pub fn div(&mut self, a: Var, b: Var) -> Var {
        self.assert_same_shape(a, b, "div");
        let out = self.value(a) / self.value(b);
        let out_id = Var(self.nodes.len());
        self.push(
            out,
            Some(Box::new(move |t, g, grads| {
                let bv = t.value(b);
                grads.add(a, g / bv);
                let mut gb = g * t.value(out_id);
                gb /= bv;
                gb.mapv_inplace(|x| -x);
                grads.add(b, gb);
            })),
        )
    }

    pub fn neg(&mut self, a: Var) -> Var {
        let out = self.value(a).mapv(|x| -x);
        self.push(
            out,
            Some(Box::new(move |_, g, grads| {
                grads.add(a, g.mapv(|x| -x));
            })),
        )
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let out = self.value(a).mapv(|x| x * c);
        self.push(
            out,
            Some(Box::new(move |_, g, grads| {
                grads.add(a, g.mapv(|x| x * c));
            })),
        )
    }

    pub fn add_scalar(&mut self, a: Var, c: f64) -> Var {
        let out = self.value(a).mapv(|x| x + c);
        self.push(
            out,
            Some(Box::new(move |_, g, grads| {
                grads.add(a, g.clone());
            })),
        )
    }

    pub fn exp(&mut self, a: Var) -> Var {
        let out = self.value(a).mapv(f64::exp);
        let out_id = Var(self.nodes.len());
        self.push(
            out,
            Some(Box::new(move |t, g, grads| {
                grads.add(a, g * t.value(out_id));
            })),
        )
    }

    pub fn ln(&mut self, a: Var) -> Var {
        let out = self.value(a).mapv(f64::ln);
        self.push(
            out,
            Some(Box::new(move |t, g, grads| {
                grads.add(a, g / t.value(a));
            })),
        )
    }

    pub fn sqrt(&mut self, a: Var) -> Var {
        let out = self.value(a).mapv(f64::sqrt);
        let out_id = Var(self.nodes.len());
        self.push(
            out,
            Some(Box::new(move |t, g, grads| {
                let y = t.value(out_id);
                let gx = ndarray::Zip::from(g)
                    .and(y)
                    .map_collect(|&gv, &yv| 0.5 * gv / yv);
                grads.add(a, gx);
            })),
        )
    }

    pub fn square(&mut self, a: Var) -> Var {
        let out = self.value(a).mapv(|x| x * x);
        self.push(
            out,
            Some(Box::new(move |t, g, grads| {
                let gx = ndarray::Zip::from(g)
                    .and(t.value(a))
                    .map_collect(|&gv, &xv| 2.0 * gv * xv);
                grads.add(a, gx);
            })),
        )
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let out = self.value(a).mapv(f64::tanh);
        let out_id = Var(self.nodes.len());
        self.push(
            out,
            Some(Box::new(move |t, g, grads| {
                let y = t.value(out_id);
                let gx = ndarray::Zip::from(g)
                    .and(y)
                    .map_collect(|&gv, &yv| gv * (1.0 - yv * yv));
                grads.add(a, gx);
            })),
        )
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let out = self.value(a).mapv(stable_sigmoid);
        let out_id = Var(self.nodes.len());
        self.push(
            out,
            Some(Box::new(move |t, g, grads| {
                let y = t.value(out_id);
                let gx = ndarray::Zip::from(g)
                    .and(y)
                    .map_collect(|&gv, &yv| gv * yv * (1.0 - yv));
                grads.add(a, gx);
            })),
        )
    }

    pub fn softplus(&mut self, a: Var) -> Var {
        let out = self.value(a).mapv(stable_softplus);
        self.push(
            out,
            Some(Box::new(move |t, g, grads| {
                let gx = ndarray::Zip::from(g)
                    .and(t.value(a))
                    .map_collect(|&gv, &xv| gv * stable_sigmoid(xv));
                grads.add(a, gx);
            })),
        )
    }

    pub fn leaky_relu(&mut self, a: Var, slope: f64) -> Var {
        let out = self.value(a).mapv(|x| if x >= 0.0 { x } else { slope * x });
        self.push(
            out,
            Some(Box::new(move |t, g, grads| {
                let gx = ndarray::Zip::from(g)
                    .and(t.value(a))
                    .map_collect(|&gv, &xv| if xv >= 0.0 { gv } else { slope * gv });
                grads.add(a, gx);
            })),
        )
    }

    /// `max(x, c)`; gradient passes only where `x > c`.
    pub fn clamp_min(&mut self, a: Var, c: f64) -> Var {
        let out = self.value(a).mapv(|x| x.max(c));
        self.push(
            out,
            Some(Box::new(move |t, g, grads| {
                let gx = ndarray::Zip::from(g)
                    .and(t.value(a))
                    .map_collect(|&gv, &xv| if xv > c { gv } else { 0.0 });
                grads.add(a, gx);
            })),
        )
    }

    /// Standard normal CDF, elementwise.
    pub fn normal_cdf(&mut self, a: Var) -> Var {
        let out = self.value(a).mapv(std_normal_cdf);
        self.push(
            out,
            Some(Box::new(move |t, g, grads| {
                let gx = ndarray::Zip::from(g)
                    .and(t.value(a))
                    .map_collect(|&gv, &xv| gv * std_normal_pdf(xv));
                grads.add(a, gx);
            })),
        )
    }

    /// Round half away from zero with a straight-through gradient.
    pub fn round_ste(&mut self, a: Var) -> Var {
        let out = self.value(a).mapv(f64::round);
        self.push(
            out,
            Some(Box::new(move |_, g, grads| {
                grads.add(a, g.clone());
            })),
        )
    }

    /// Concatenate along the channel axis (axis 0 of `[C, H, W]`).
    pub fn concat_channels(&mut self, parts: &[Var]) -> Var {
        assert!(!parts.is_empty());
        let views: Vec<_> = parts.iter().map(|&v| self.value(v).view()).collect();
        let out = ndarray::concatenate(Axis(0), &views).expect("concat: incompatible shapes");
        let sizes: Vec<usize> = parts.iter().map(|&v| self.value(v).shape()[0]).collect();
        let parts: Vec<Var> = parts.to_vec();
        self.push(
            out,
            Some(Box::new(move |_, g, grads| {
                let mut at = 0;
                for (&p, &c) in parts.iter().zip(&sizes) {
                    let gp = g
                        .slice_axis(Axis(0), Slice::from(at..at + c))
                        .to_owned();
                    grads.add(p, gp);
                    at += c;
                }
            })),
        )
    }

    /// Take channels `[start, start + len)`.
    pub fn slice_channels(&mut self, a: Var, start: usize, len: usize) -> Var {
        let full = self.value(a).shape().to_vec();
        let out = self
            .value(a)
            .slice_axis(Axis(0), Slice::from(start..start + len))
            .to_owned();
        self.push(
            out,
            Some(Box::new(move |_, g, grads| {
                let mut gx = ArrayD::zeros(IxDyn(&full));
                gx.slice_axis_mut(Axis(0), Slice::from(start..start + len))
                    .assign(g);
                grads.add(a, gx);
            })),
        )
    }

    /// Multiply `[C, H, W]` by a per-channel vector `[C]`.
    pub fn mul_chan(&mut self, a: Var, v: Var) -> Var {
        let x = self.value(a);
        let w = self.value(v);
        debug_assert_eq!(x.shape()[0], w.len(), "mul_chan: channel mismatch");
        let mut out = x.clone();
        for (c, wc) in w.iter().enumerate() {
            out.index_axis_mut(Axis(0), c).mapv_inplace(|t| t * wc);
        }
        self.push(
            out,
            Some(Box::new(move |t, g, grads| {
                let x = t.value(a);
                let w = t.value(v);
                let mut gx = g.clone();
                for (c, wc) in w.iter().enumerate() {
                    gx.index_axis_mut(Axis(0), c).mapv_inplace(|t| t * wc);
                }
                grads.add(a, gx);
                let gw: Vec<f64> = (0..w.len())
                    .map(|c| {
                        let gs = g.index_axis(Axis(0), c);
                        let xs = x.index_axis(Axis(0), c);
                        gs.iter().zip(xs.iter()).map(|(a, b)| a * b).sum()
                    })
                    .collect();
                grads.add(v, ArrayD::from_shape_vec(IxDyn(&[w.len()]), gw).unwrap());
            })),
        )
    }

    /// Add a per-channel vector `[C]` to `[C, H, W]`.
    pub fn add_chan(&mut self, a: Var, v: Var) -> Var {
        let x = self.value(a);
        let w = self.value(v);
        debug_assert_eq!(x.shape()[0], w.len(), "add_chan: channel mismatch");
        let mut out = x.clone();
        for (c, wc) in w.iter().enumerate() {
            out.index_axis_mut(Axis(0), c).mapv_inplace(|t| t + wc);
        }
        self.push(
            out,
            Some(Box::new(move |t, g, grads| {
                grads.add(a, g.clone());
                let w_len = t.value(v).len();
                let gw: Vec<f64> = (0..w_len)
                    .map(|c| g.index_axis(Axis(0), c).sum())
                    .collect();
                grads.add(v, ArrayD::from_shape_vec(IxDyn(&[w_len]), gw).unwrap());
            })),
        )
    }

    /// Sum of all elements, as a `[1]` tensor.
    pub fn sum_all(&mut self, a: Var) -> Var {
        let s = self.value(a).sum();
        let shape = self.value(a).raw_dim();
        self.push(
            ArrayD::from_elem(IxDyn(&[1]), s),
            Some(Box::new(move |_, g, grads| {
                let gv = g[[0]];
                grads.add(a, ArrayD::from_elem(shape.clone(), gv));
            })),
        )
    }

    /// Mean of all elements, as a `[1]` tensor.
    pub fn mean_all(&mut self, a: Var) -> Var {
        let n = self.value(a).len() as f64;
        let s = self.sum_all(a);
        self.scale(s, 1.0 / n)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autograd::params::ParamStore;
    use ndarray::IxDyn;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Central finite difference of `f` along direction `d`, compared to
    /// the analytic directional derivative computed by backward.
    fn check_grad<F>(build: F, shape: &[usize], seed: u64, tol: f64)
    where
        F: Fn(&mut Tape, Var) -> Var,
    {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n: usize = shape.iter().product();
        let x0: Vec<f64> = (0..n).map(|_| rng.gen_range(0.2..1.5)).collect();
        let dir: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();

        let mut store = ParamStore::new();
        let pid = store.register(
            "x",
            ArrayD::from_shape_vec(IxDyn(shape), x0.clone()).unwrap(),
        );

        let mut tape = Tape::new(true);
        let x = tape.param(&store, pid);
        let y = build(&mut tape, x);
        let loss = tape.sum_all(y);
        let grads = tape.backward(loss, &store);
        let g = grads.get(pid).expect("missing grad");
        let analytic: f64 = g.iter().zip(&dir).map(|(a, b)| a * b).sum();

        let eps = 1e-6;
        let eval = |delta: f64| -> f64 {
            let xs: Vec<f64> = x0.iter().zip(&dir).map(|(a, b)| a + delta * b).collect();
            let mut s2 = ParamStore::new();
            let p2 = s2.register("x", ArrayD::from_shape_vec(IxDyn(shape), xs).unwrap());
            let mut t2 = Tape::new(false);
            let x2 = t2.param(&s2, p2);
            let y2 = build(&mut t2, x2);
            let l2 = t2.sum_all(y2);
            t2.scalar(l2)
        };
        let fd = (eval(eps) - eval(-eps)) / (2.0 * eps);
        let denom = analytic.abs().max(fd.abs()).max(1e-8);
        assert!(
            ((analytic - fd) / denom).abs() < tol,
            "grad mismatch: analytic={analytic}, fd={fd}"
        );
    }

    #[test]
    fn elementwise_grads_match_finite_differences() {
        check_grad(|t, x| t.exp(x), &[3, 4, 5], 1, 1e-6);
        check_grad(|t, x| t.ln(x), &[3, 4, 5], 2, 1e-6);
        check_grad(|t, x| t.sqrt(x), &[3, 4, 5], 3, 1e-6);
        check_grad(|t, x| t.square(x), &[3, 4, 5], 4, 1e-6);
        check_grad(|t, x| t.tanh(x), &[3, 4, 5], 5, 1e-6);
        check_grad(|t, x| t.sigmoid(x), &[3, 4, 5], 6, 1e-6);
        check_grad(|t, x| t.softplus(x), &[3, 4, 5], 7, 1e-6);
        check_grad(|t, x| t.normal_cdf(x), &[3, 4, 5], 8, 1e-6);
        check_grad(|t, x| t.leaky_relu(x, 0.01), &[3, 4, 5], 9, 1e-6);
    }

    #[test]
    fn composite_grads_match_finite_differences() {
        check_grad(
            |t, x| {
                let a = t.square(x);
                let b = t.exp(x);
                let c = t.add(a, b);
                let d = t.sqrt(c);
                t.div(x, d)
            },
            &[2, 3, 3],
            11,
            1e-5,
        );
        check_grad(
            |t, x| {
                let s = t.slice_channels(x, 1, 2);
                let u = t.slice_channels(x, 0, 2);
                let m = t.mul(s, u);
                t.concat_channels(&[m, s])
            },
            &[4, 3, 3],
            12,
            1e-5,
        );
    }

    #[test]
    fn channel_broadcast_grads() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let x0: Vec<f64> = (0..3 * 4 * 4).map(|_| rng.gen_range(0.2..1.5)).collect();
        let v0: Vec<f64> = (0..3).map(|_| rng.gen_range(0.5..2.0)).collect();
        let mut store = ParamStore::new();
        let px = store.register("x", ArrayD::from_shape_vec(IxDyn(&[3, 4, 4]), x0).unwrap());
        let pv = store.register("v", ArrayD::from_shape_vec(IxDyn(&[3]), v0).unwrap());

        let run = |store: &ParamStore, rec: bool| -> (f64, Option<ParamGrads>) {
            let mut tape = Tape::new(rec);
            let x = tape.param(store, px);
            let v = tape.param(store, pv);
            let y = tape.mul_chan(x, v);
            let z = tape.add_chan(y, v);
            let l = tape.sum_all(z);
            let g = rec.then(|| tape.backward(l, store));
            (tape.scalar(l), g)
        };
        let (_, grads) = run(&store, true);
        let grads = grads.unwrap();

        let eps = 1e-6;
        for c in 0..3 {
            let base = store.value(pv)[[c]];
            store.value_mut(pv)[[c]] = base + eps;
            let (lp, _) = run(&store, false);
            store.value_mut(pv)[[c]] = base - eps;
            let (lm, _) = run(&store, false);
            store.value_mut(pv)[[c]] = base;
            let fd = (lp - lm) / (2.0 * eps);
            let an = grads.get(pv).unwrap()[[c]];
            assert!((an - fd).abs() < 1e-6 * fd.abs().max(1.0), "c={c} {an} {fd}");
        }
    }

    #[test]
    fn round_ste_is_identity_in_backward() {
        let mut store = ParamStore::new();
        let pid = store.register(
            "x",
            ArrayD::from_shape_vec(IxDyn(&[4]), vec![0.4, -0.5, 1.6, 2.5]).unwrap(),
        );
        let mut tape = Tape::new(true);
        let x = tape.param(&store, pid);
        let y = tape.round_ste(x);
        assert_eq!(
            tape.value(y).iter().copied().collect::<Vec<_>>(),
            vec![0.0, -1.0, 2.0, 3.0]
        );
        let l = tape.sum_all(y);
        let g = tape.backward(l, &store);
        assert!(g.get(pid).unwrap().iter().all(|&v| v == 1.0));
    }
}
