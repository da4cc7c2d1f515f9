//! Forward ops with their backward rules.
//!
//! Conventions: tensors are row-major; rank-2 values with a sequence axis are
//! (length, channels); convolution weights are (out_channels, width,
//! in_channels). Shape violations are programming errors and panic.
//! Subgradient choices: |x| uses sign with 0 at 0, max pooling routes to the
//! first maximal index, clamp passes gradient on the closed interval.

use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;

use super::tape::{NodeId, Tape};
use super::tensor::Tensor;

fn same_dims(t: &Tape, a: NodeId, b: NodeId, op: &str) {
    assert_eq!(t.value(a).dims(), t.value(b).dims(), "{op}: operand shapes differ");
}

pub fn add(t: &mut Tape, a: NodeId, b: NodeId) -> NodeId {
    same_dims(t, a, b, "add");
    let mut v = t.value(a).clone();
    v.axpy(1.0, t.value(b));
    t.push(v, vec![a, b], || Box::new(|g, _| vec![g.clone(), g.clone()]))
}

pub fn sub(t: &mut Tape, a: NodeId, b: NodeId) -> NodeId {
    same_dims(t, a, b, "sub");
    let mut v = t.value(a).clone();
    v.axpy(-1.0, t.value(b));
    t.push(v, vec![a, b], || {
        Box::new(|g, _| {
            let mut nb = g.clone();
            for x in nb.data_mut() {
                *x = -*x;
            }
            vec![g.clone(), nb]
        })
    })
}

pub fn mul(t: &mut Tape, a: NodeId, b: NodeId) -> NodeId {
    same_dims(t, a, b, "mul");
    let av = t.value(a).clone();
    let bv = t.value(b).clone();
    let data = av.data().iter().zip(bv.data()).map(|(x, y)| x * y).collect();
    let v = Tensor::from_vec(av.dims(), data);
    t.push(v, vec![a, b], move || {
        Box::new(move |g, _| {
            let da = g.data().iter().zip(bv.data()).map(|(g, y)| g * y).collect();
            let db = g.data().iter().zip(av.data()).map(|(g, x)| g * x).collect();
            vec![Tensor::from_vec(g.dims(), da), Tensor::from_vec(g.dims(), db)]
        })
    })
}

pub fn div(t: &mut Tape, a: NodeId, b: NodeId) -> NodeId {
    same_dims(t, a, b, "div");
    let bv = t.value(b).clone();
    let data = t.value(a).data().iter().zip(bv.data()).map(|(x, y)| x / y).collect();
    let v = Tensor::from_vec(bv.dims(), data);
    t.push(v, vec![a, b], move || {
        Box::new(move |g, out| {
            let da = g.data().iter().zip(bv.data()).map(|(g, y)| g / y).collect();
            let db = g
                .data()
                .iter()
                .zip(out.data())
                .zip(bv.data())
                .map(|((g, q), y)| -g * q / y)
                .collect();
            vec![Tensor::from_vec(g.dims(), da), Tensor::from_vec(g.dims(), db)]
        })
    })
}

pub fn scale(t: &mut Tape, a: NodeId, c: f64) -> NodeId {
    let data = t.value(a).data().iter().map(|x| c * x).collect();
    let v = Tensor::from_vec(t.value(a).dims(), data);
    t.push(v, vec![a], move || {
        Box::new(move |g, _| {
            let da = g.data().iter().map(|g| c * g).collect();
            vec![Tensor::from_vec(g.dims(), da)]
        })
    })
}

pub fn add_const(t: &mut Tape, a: NodeId, c: f64) -> NodeId {
    let data = t.value(a).data().iter().map(|x| x + c).collect();
    let v = Tensor::from_vec(t.value(a).dims(), data);
    t.push(v, vec![a], || Box::new(|g, _| vec![g.clone()]))
}

pub fn tanh(t: &mut Tape, a: NodeId) -> NodeId {
    let data = t.value(a).data().iter().map(|x| libm::tanh(*x)).collect();
    let v = Tensor::from_vec(t.value(a).dims(), data);
    t.push(v, vec![a], || {
        Box::new(|g, out| {
            let da = g.data().iter().zip(out.data()).map(|(g, y)| g * (1.0 - y * y)).collect();
            vec![Tensor::from_vec(g.dims(), da)]
        })
    })
}

pub fn exp(t: &mut Tape, a: NodeId) -> NodeId {
    let data = t.value(a).data().iter().map(|x| libm::exp(*x)).collect();
    let v = Tensor::from_vec(t.value(a).dims(), data);
    t.push(v, vec![a], || {
        Box::new(|g, out| {
            let da = g.data().iter().zip(out.data()).map(|(g, y)| g * y).collect();
            vec![Tensor::from_vec(g.dims(), da)]
        })
    })
}

pub fn ln(t: &mut Tape, a: NodeId) -> NodeId {
    let av = t.value(a).clone();
    let data = av.data().iter().map(|x| libm::log(*x)).collect();
    let v = Tensor::from_vec(av.dims(), data);
    t.push(v, vec![a], move || {
        Box::new(move |g, _| {
            let da = g.data().iter().zip(av.data()).map(|(g, x)| g / x).collect();
            vec![Tensor::from_vec(g.dims(), da)]
        })
    })
}

pub fn sqrt(t: &mut Tape, a: NodeId) -> NodeId {
    let data = t.value(a).data().iter().map(|x| libm::sqrt(*x)).collect();
    let v = Tensor::from_vec(t.value(a).dims(), data);
    t.push(v, vec![a], || {
        Box::new(|g, out| {
            let da = g.data().iter().zip(out.data()).map(|(g, y)| g / (2.0 * y)).collect();
            vec![Tensor::from_vec(g.dims(), da)]
        })
    })
}

pub fn abs(t: &mut Tape, a: NodeId) -> NodeId {
    let av = t.value(a).clone();
    let data = av.data().iter().map(|x| x.abs()).collect();
    let v = Tensor::from_vec(av.dims(), data);
    t.push(v, vec![a], move || {
        Box::new(move |g, _| {
            let da = g
                .data()
                .iter()
                .zip(av.data())
                .map(|(g, x)| if *x > 0.0 { *g } else if *x < 0.0 { -*g } else { 0.0 })
                .collect();
            vec![Tensor::from_vec(g.dims(), da)]
        })
    })
}

pub fn relu(t: &mut Tape, a: NodeId) -> NodeId {
    let data = t.value(a).data().iter().map(|x| x.max(0.0)).collect();
    let v = Tensor::from_vec(t.value(a).dims(), data);
    t.push(v, vec![a], || {
        Box::new(|g, out| {
            let da = g.data().iter().zip(out.data()).map(|(g, y)| if *y > 0.0 { *g } else { 0.0 }).collect();
            vec![Tensor::from_vec(g.dims(), da)]
        })
    })
}

pub fn clamp(t: &mut Tape, a: NodeId, lo: f64, hi: f64) -> NodeId {
    let av = t.value(a).clone();
    let data = av.data().iter().map(|x| x.clamp(lo, hi)).collect();
    let v = Tensor::from_vec(av.dims(), data);
    t.push(v, vec![a], move || {
        Box::new(move |g, _| {
            let da = g
                .data()
                .iter()
                .zip(av.data())
                .map(|(g, x)| if *x >= lo && *x <= hi { *g } else { 0.0 })
                .collect();
            vec![Tensor::from_vec(g.dims(), da)]
        })
    })
}

/// Sum of all entries, as a 1-element tensor.
pub fn sum(t: &mut Tape, a: NodeId) -> NodeId {
    let dims = t.value(a).dims().to_vec();
    let s: f64 = t.value(a).data().iter().sum();
    t.push(Tensor::scalar(s), vec![a], move || {
        Box::new(move |g, _| {
            let go = g.item();
            vec![Tensor::from_vec(&dims, vec![go; dims.iter().product()])]
        })
    })
}

/// Per-row sums of a rank-2 tensor: (r, c) -> (r).
pub fn rowsum(t: &mut Tape, a: NodeId) -> NodeId {
    let v = t.value(a);
    assert_eq!(v.dims().len(), 2, "rowsum expects rank 2");
    let (r, c) = (v.rows(), v.cols());
    let data = (0..r).map(|i| v.data()[i * c..(i + 1) * c].iter().sum()).collect();
    t.push(Tensor::vector(data), vec![a], move || {
        Box::new(move |g, _| {
            let mut da = Tensor::zeros(&[r, c]);
            for i in 0..r {
                let gi = g.data()[i];
                for x in &mut da.data_mut()[i * c..(i + 1) * c] {
                    *x = gi;
                }
            }
            vec![da]
        })
    })
}

pub fn matmul(t: &mut Tape, a: NodeId, b: NodeId) -> NodeId {
    let (av, bv) = (t.value(a).clone(), t.value(b).clone());
    let (p, q) = (av.rows(), av.cols());
    let (q2, r) = (bv.rows(), bv.cols());
    assert_eq!(q, q2, "matmul inner dims differ");
    let mut out = Tensor::zeros(&[p, r]);
    for i in 0..p {
        for k in 0..q {
            let aik = av.data()[i * q + k];
            if aik == 0.0 {
                continue;
            }
            let brow = &bv.data()[k * r..(k + 1) * r];
            let orow = &mut out.data_mut()[i * r..(i + 1) * r];
            for (o, b) in orow.iter_mut().zip(brow) {
                *o += aik * b;
            }
        }
    }
    t.push(out, vec![a, b], move || {
        Box::new(move |g, _| {
            // da = g . b^T, db = a^T . g
            let mut da = Tensor::zeros(&[p, q]);
            let mut db = Tensor::zeros(&[q, r]);
            for i in 0..p {
                for k in 0..q {
                    let mut acc = 0.0;
                    for j in 0..r {
                        acc += g.data()[i * r + j] * bv.data()[k * r + j];
                    }
                    da.data_mut()[i * q + k] = acc;
                }
            }
            for k in 0..q {
                for j in 0..r {
                    let mut acc = 0.0;
                    for i in 0..p {
                        acc += av.data()[i * q + k] * g.data()[i * r + j];
                    }
                    db.data_mut()[k * r + j] = acc;
                }
            }
            vec![da, db]
        })
    })
}

/// a . b^T for a: (p, q), b: (r, q).
pub fn matmul_nt(t: &mut Tape, a: NodeId, b: NodeId) -> NodeId {
    let (av, bv) = (t.value(a).clone(), t.value(b).clone());
    let (p, q) = (av.rows(), av.cols());
    let (r, q2) = (bv.rows(), bv.cols());
    assert_eq!(q, q2, "matmul_nt inner dims differ");
    let mut out = Tensor::zeros(&[p, r]);
    for i in 0..p {
        for j in 0..r {
            let mut acc = 0.0;
            for k in 0..q {
                acc += av.data()[i * q + k] * bv.data()[j * q + k];
            }
            out.data_mut()[i * r + j] = acc;
        }
    }
    t.push(out, vec![a, b], move || {
        Box::new(move |g, _| {
            let mut da = Tensor::zeros(&[p, q]);
            let mut db = Tensor::zeros(&[r, q]);
            for i in 0..p {
                for j in 0..r {
                    let gij = g.data()[i * r + j];
                    if gij == 0.0 {
                        continue;
                    }
                    for k in 0..q {
                        da.data_mut()[i * q + k] += gij * bv.data()[j * q + k];
                        db.data_mut()[j * q + k] += gij * av.data()[i * q + k];
                    }
                }
            }
            vec![da, db]
        })
    })
}

/// a . x for a: (p, q), x: (q).
pub fn matvec(t: &mut Tape, a: NodeId, x: NodeId) -> NodeId {
    let (av, xv) = (t.value(a).clone(), t.value(x).clone());
    let (p, q) = (av.rows(), av.cols());
    assert_eq!(xv.len(), q, "matvec dims differ");
    let data = (0..p)
        .map(|i| av.data()[i * q..(i + 1) * q].iter().zip(xv.data()).map(|(a, x)| a * x).sum())
        .collect();
    t.push(Tensor::vector(data), vec![a, x], move || {
        Box::new(move |g, _| {
            let mut da = Tensor::zeros(&[p, q]);
            let mut dx = Tensor::zeros(&[q]);
            for i in 0..p {
                let gi = g.data()[i];
                for k in 0..q {
                    da.data_mut()[i * q + k] = gi * xv.data()[k];
                    dx.data_mut()[k] += gi * av.data()[i * q + k];
                }
            }
            vec![da, dx]
        })
    })
}

/// a^T . x for a: (p, q), x: (p).
pub fn matvec_t(t: &mut Tape, a: NodeId, x: NodeId) -> NodeId {
    let (av, xv) = (t.value(a).clone(), t.value(x).clone());
    let (p, q) = (av.rows(), av.cols());
    assert_eq!(xv.len(), p, "matvec_t dims differ");
    let mut data = vec![0.0; q];
    for i in 0..p {
        let xi = xv.data()[i];
        for k in 0..q {
            data[k] += av.data()[i * q + k] * xi;
        }
    }
    t.push(Tensor::vector(data), vec![a, x], move || {
        Box::new(move |g, _| {
            let mut da = Tensor::zeros(&[p, q]);
            let mut dx = Tensor::zeros(&[p]);
            for i in 0..p {
                let mut acc = 0.0;
                for k in 0..q {
                    da.data_mut()[i * q + k] = xv.data()[i] * g.data()[k];
                    acc += av.data()[i * q + k] * g.data()[k];
                }
                dx.data_mut()[i] = acc;
            }
            vec![da, dx]
        })
    })
}

/// Row-wise affine map: x (L, din), w (dout, din), b (dout) -> (L, dout).
pub fn linear_rows(t: &mut Tape, x: NodeId, w: NodeId, b: NodeId) -> NodeId {
    let (xv, wv) = (t.value(x).clone(), t.value(w).clone());
    let bv = t.value(b).clone();
    let (l, din) = (xv.rows(), xv.cols());
    let (dout, din2) = (wv.rows(), wv.cols());
    assert_eq!(din, din2, "linear_rows dims differ");
    assert_eq!(bv.len(), dout, "linear_rows bias dim differs");
    let mut out = Tensor::zeros(&[l, dout]);
    for i in 0..l {
        for o in 0..dout {
            let mut acc = bv.data()[o];
            for j in 0..din {
                acc += xv.data()[i * din + j] * wv.data()[o * din + j];
            }
            out.data_mut()[i * dout + o] = acc;
        }
    }
    t.push(out, vec![x, w, b], move || {
        Box::new(move |g, _| {
            let mut dx = Tensor::zeros(&[l, din]);
            let mut dw = Tensor::zeros(&[dout, din]);
            let mut db = Tensor::zeros(&[dout]);
            for i in 0..l {
                for o in 0..dout {
                    let gio = g.data()[i * dout + o];
                    if gio == 0.0 {
                        continue;
                    }
                    db.data_mut()[o] += gio;
                    for j in 0..din {
                        dx.data_mut()[i * din + j] += gio * wv.data()[o * din + j];
                        dw.data_mut()[o * din + j] += gio * xv.data()[i * din + j];
                    }
                }
            }
            vec![dx, dw, db]
        })
    })
}

/// Embedding lookup: table (V, u), ids -> (len(ids), u). Repeated ids
/// accumulate in the backward scatter.
pub fn gather_rows(t: &mut Tape, table: NodeId, ids: &[usize]) -> NodeId {
    let tv = t.value(table).clone();
    let (v, u) = (tv.rows(), tv.cols());
    let l = ids.len();
    let mut out = Tensor::zeros(&[l, u]);
    for (i, &id) in ids.iter().enumerate() {
        assert!(id < v, "gather_rows id {id} out of range {v}");
        out.data_mut()[i * u..(i + 1) * u].copy_from_slice(&tv.data()[id * u..(id + 1) * u]);
    }
    let ids: Vec<usize> = ids.to_vec();
    t.push(out, vec![table], move || {
        Box::new(move |g, _| {
            let mut dt = Tensor::zeros(&[v, u]);
            for (i, &id) in ids.iter().enumerate() {
                for j in 0..u {
                    dt.data_mut()[id * u + j] += g.data()[i * u + j];
                }
            }
            vec![dt]
        })
    })
}

pub fn concat_vec(t: &mut Tape, a: NodeId, b: NodeId) -> NodeId {
    let (av, bv) = (t.value(a).clone(), t.value(b).clone());
    let (p, q) = (av.len(), bv.len());
    let mut data = av.data().to_vec();
    data.extend_from_slice(bv.data());
    t.push(Tensor::vector(data), vec![a, b], move || {
        Box::new(move |g, _| {
            vec![
                Tensor::vector(g.data()[..p].to_vec()),
                Tensor::vector(g.data()[p..p + q].to_vec()),
            ]
        })
    })
}

/// Two u-vectors stacked into a (2, u) sequence.
pub fn stack2(t: &mut Tape, a: NodeId, b: NodeId) -> NodeId {
    same_dims(t, a, b, "stack2");
    let u = t.value(a).len();
    let mut data = t.value(a).data().to_vec();
    data.extend_from_slice(t.value(b).data());
    t.push(Tensor::from_vec(&[2, u], data), vec![a, b], move || {
        Box::new(move |g, _| {
            vec![
                Tensor::vector(g.data()[..u].to_vec()),
                Tensor::vector(g.data()[u..].to_vec()),
            ]
        })
    })
}

/// Row i of a rank-2 tensor as a vector.
pub fn row(t: &mut Tape, x: NodeId, i: usize) -> NodeId {
    let xv = t.value(x);
    let (r, c) = (xv.rows(), xv.cols());
    assert!(i < r, "row index out of range");
    let data = xv.data()[i * c..(i + 1) * c].to_vec();
    t.push(Tensor::vector(data), vec![x], move || {
        Box::new(move |g, _| {
            let mut dx = Tensor::zeros(&[r, c]);
            dx.data_mut()[i * c..(i + 1) * c].copy_from_slice(g.data());
            vec![dx]
        })
    })
}

/// Width-k same-length convolution with edge-replication padding.
/// x (L, cin), w (cout, k, cin) with k odd, b (cout) -> (L, cout).
pub fn conv1d_same(t: &mut Tape, x: NodeId, w: NodeId, b: NodeId) -> NodeId {
    let (xv, wv, bv) = (t.value(x).clone(), t.value(w).clone(), t.value(b).clone());
    let (l, cin) = (xv.rows(), xv.cols());
    assert!(l >= 1, "conv1d_same on empty sequence");
    let (cout, k, cin2) = (wv.dims()[0], wv.dims()[1], wv.dims()[2]);
    assert_eq!(cin, cin2, "conv1d_same channel mismatch");
    assert_eq!(k % 2, 1, "conv1d_same needs odd width");
    assert_eq!(bv.len(), cout);
    let half = k / 2;
    let src = move |ti: usize, kk: usize| -> usize { (ti + kk).saturating_sub(half).min(l - 1) };
    let mut out = Tensor::zeros(&[l, cout]);
    for ti in 0..l {
        for kk in 0..k {
            let s = src(ti, kk);
            let xrow = &xv.data()[s * cin..(s + 1) * cin];
            for o in 0..cout {
                let wrow = &wv.data()[(o * k + kk) * cin..(o * k + kk + 1) * cin];
                let mut acc = 0.0;
                for c in 0..cin {
                    acc += wrow[c] * xrow[c];
                }
                out.data_mut()[ti * cout + o] += acc;
            }
        }
        for o in 0..cout {
            out.data_mut()[ti * cout + o] += bv.data()[o];
        }
    }
    t.push(out, vec![x, w, b], move || {
        Box::new(move |g, _| {
            let mut dx = Tensor::zeros(&[l, cin]);
            let mut dw = Tensor::zeros(&[cout, k, cin]);
            let mut db = Tensor::zeros(&[cout]);
            for ti in 0..l {
                for o in 0..cout {
                    db.data_mut()[o] += g.data()[ti * cout + o];
                }
                for kk in 0..k {
                    let s = src(ti, kk);
                    for o in 0..cout {
                        let gto = g.data()[ti * cout + o];
                        if gto == 0.0 {
                            continue;
                        }
                        for c in 0..cin {
                            dx.data_mut()[s * cin + c] += gto * wv.data()[(o * k + kk) * cin + c];
                            dw.data_mut()[(o * k + kk) * cin + c] += gto * xv.data()[s * cin + c];
                        }
                    }
                }
            }
            vec![dx, dw, db]
        })
    })
}

/// Width-2 valid convolution: x (L, cin), w (cout, 2, cin) -> (L-1, cout).
pub fn conv1d_valid(t: &mut Tape, x: NodeId, w: NodeId, b: NodeId) -> NodeId {
    let (xv, wv, bv) = (t.value(x).clone(), t.value(w).clone(), t.value(b).clone());
    let (l, cin) = (xv.rows(), xv.cols());
    assert!(l >= 2, "conv1d_valid needs length >= 2");
    let (cout, k, cin2) = (wv.dims()[0], wv.dims()[1], wv.dims()[2]);
    assert_eq!(k, 2);
    assert_eq!(cin, cin2, "conv1d_valid channel mismatch");
    assert_eq!(bv.len(), cout);
    let lo = l - 1;
    let mut out = Tensor::zeros(&[lo, cout]);
    for ti in 0..lo {
        for o in 0..cout {
            let mut acc = bv.data()[o];
            for kk in 0..2 {
                for c in 0..cin {
                    acc += wv.data()[(o * 2 + kk) * cin + c] * xv.data()[(ti + kk) * cin + c];
                }
            }
            out.data_mut()[ti * cout + o] = acc;
        }
    }
    t.push(out, vec![x, w, b], move || {
        Box::new(move |g, _| {
            let mut dx = Tensor::zeros(&[l, cin]);
            let mut dw = Tensor::zeros(&[cout, 2, cin]);
            let mut db = Tensor::zeros(&[cout]);
            for ti in 0..lo {
                for o in 0..cout {
                    let gto = g.data()[ti * cout + o];
                    if gto == 0.0 {
                        continue;
                    }
                    db.data_mut()[o] += gto;
                    for kk in 0..2 {
                        for c in 0..cin {
                            dx.data_mut()[(ti + kk) * cin + c] += gto * wv.data()[(o * 2 + kk) * cin + c];
                            dw.data_mut()[(o * 2 + kk) * cin + c] += gto * xv.data()[(ti + kk) * cin + c];
                        }
                    }
                }
            }
            vec![dx, dw, db]
        })
    })
}

/// Width-2 stride-1 transposed convolution: x (L, cin) -> (L+1, cout).
pub fn deconv1d(t: &mut Tape, x: NodeId, w: NodeId, b: NodeId) -> NodeId {
    let (xv, wv, bv) = (t.value(x).clone(), t.value(w).clone(), t.value(b).clone());
    let (l, cin) = (xv.rows(), xv.cols());
    let (cout, k, cin2) = (wv.dims()[0], wv.dims()[1], wv.dims()[2]);
    assert_eq!(k, 2);
    assert_eq!(cin, cin2, "deconv1d channel mismatch");
    assert_eq!(bv.len(), cout);
    let lo = l + 1;
    let mut out = Tensor::zeros(&[lo, cout]);
    for ti in 0..lo {
        for o in 0..cout {
            let mut acc = bv.data()[o];
            for kk in 0..2usize {
                let Some(s) = ti.checked_sub(kk) else { continue };
                if s >= l {
                    continue;
                }
                for c in 0..cin {
                    acc += wv.data()[(o * 2 + kk) * cin + c] * xv.data()[s * cin + c];
                }
            }
            out.data_mut()[ti * cout + o] = acc;
        }
    }
    t.push(out, vec![x, w, b], move || {
        Box::new(move |g, _| {
            let mut dx = Tensor::zeros(&[l, cin]);
            let mut dw = Tensor::zeros(&[cout, 2, cin]);
            let mut db = Tensor::zeros(&[cout]);
            for ti in 0..lo {
                for o in 0..cout {
                    let gto = g.data()[ti * cout + o];
                    if gto == 0.0 {
                        continue;
                    }
                    db.data_mut()[o] += gto;
                    for kk in 0..2usize {
                        let Some(s) = ti.checked_sub(kk) else { continue };
                        if s >= l {
                            continue;
                        }
                        for c in 0..cin {
                            dx.data_mut()[s * cin + c] += gto * wv.data()[(o * 2 + kk) * cin + c];
                            dw.data_mut()[(o * 2 + kk) * cin + c] += gto * xv.data()[s * cin + c];
                        }
                    }
                }
            }
            vec![dx, dw, db]
        })
    })
}

/// Per-channel normalization over the length axis with learned scale/shift:
/// x (L, C), gamma (C), beta (C). Population variance plus eps.
pub fn instance_norm(t: &mut Tape, x: NodeId, gamma: NodeId, beta: NodeId, eps: f64) -> NodeId {
    let xv = t.value(x).clone();
    let gv = t.value(gamma).clone();
    let bv = t.value(beta).clone();
    let (l, c) = (xv.rows(), xv.cols());
    assert_eq!(gv.len(), c, "instance_norm gamma dim");
    assert_eq!(bv.len(), c, "instance_norm beta dim");
    let ln = l as f64;
    let mut mean = vec![0.0; c];
    let mut std = vec![0.0; c];
    for ch in 0..c {
        let mut m = 0.0;
        for i in 0..l {
            m += xv.data()[i * c + ch];
        }
        m /= ln;
        let mut v = 0.0;
        for i in 0..l {
            let d = xv.data()[i * c + ch] - m;
            v += d * d;
        }
        mean[ch] = m;
        std[ch] = libm::sqrt(v / ln + eps);
    }
    let mut xhat = Tensor::zeros(&[l, c]);
    let mut out = Tensor::zeros(&[l, c]);
    for i in 0..l {
        for ch in 0..c {
            let h = (xv.data()[i * c + ch] - mean[ch]) / std[ch];
            xhat.data_mut()[i * c + ch] = h;
            out.data_mut()[i * c + ch] = gv.data()[ch] * h + bv.data()[ch];
        }
    }
    t.push(out, vec![x, gamma, beta], move || {
        Box::new(move |g, _| {
            let mut dx = Tensor::zeros(&[l, c]);
            let mut dgamma = Tensor::zeros(&[c]);
            let mut dbeta = Tensor::zeros(&[c]);
            for ch in 0..c {
                let mut sum_gh = 0.0;
                let mut sum_gh_xhat = 0.0;
                for i in 0..l {
                    let gi = g.data()[i * c + ch];
                    let h = xhat.data()[i * c + ch];
                    dbeta.data_mut()[ch] += gi;
                    dgamma.data_mut()[ch] += gi * h;
                    let gh = gi * gv.data()[ch];
                    sum_gh += gh;
                    sum_gh_xhat += gh * h;
                }
                let m_gh = sum_gh / ln;
                let m_ghh = sum_gh_xhat / ln;
                for i in 0..l {
                    let gh = g.data()[i * c + ch] * gv.data()[ch];
                    let h = xhat.data()[i * c + ch];
                    dx.data_mut()[i * c + ch] = (gh - m_gh - h * m_ghh) / std[ch];
                }
            }
            vec![dx, dgamma, dbeta]
        })
    })
}

/// Non-overlapping max pooling along the length axis; the remainder after
/// the last full window is dropped. Gradient routes to the first maximal
/// position of each window.
pub fn max_pool(t: &mut Tape, x: NodeId, stride: usize) -> NodeId {
    let xv = t.value(x);
    let (l, c) = (xv.rows(), xv.cols());
    assert!(stride >= 1 && l >= stride, "max_pool window larger than input ({l} < {stride})");
    let lo = l / stride;
    let mut out = Tensor::zeros(&[lo, c]);
    let mut arg = vec![0usize; lo * c];
    for ti in 0..lo {
        for ch in 0..c {
            let mut best = f64::NEG_INFINITY;
            let mut best_i = ti * stride;
            for i in ti * stride..(ti + 1) * stride {
                let v = xv.data()[i * c + ch];
                if v > best {
                    best = v;
                    best_i = i;
                }
            }
            out.data_mut()[ti * c + ch] = best;
            arg[ti * c + ch] = best_i;
        }
    }
    t.push(out, vec![x], move || {
        Box::new(move |g, _| {
            let mut dx = Tensor::zeros(&[l, c]);
            for ti in 0..lo {
                for ch in 0..c {
                    dx.data_mut()[arg[ti * c + ch] * c + ch] += g.data()[ti * c + ch];
                }
            }
            vec![dx]
        })
    })
}

/// Mean over the length axis: (L, C) -> (C).
pub fn mean_pool(t: &mut Tape, x: NodeId) -> NodeId {
    let xv = t.value(x);
    let (l, c) = (xv.rows(), xv.cols());
    assert!(l >= 1, "mean_pool on empty sequence");
    let ln = l as f64;
    let mut data = vec![0.0; c];
    for i in 0..l {
        for ch in 0..c {
            data[ch] += xv.data()[i * c + ch];
        }
    }
    for d in &mut data {
        *d /= ln;
    }
    t.push(Tensor::vector(data), vec![x], move || {
        Box::new(move |g, _| {
            let mut dx = Tensor::zeros(&[l, c]);
            for i in 0..l {
                for ch in 0..c {
                    dx.data_mut()[i * c + ch] = g.data()[ch] / ln;
                }
            }
            vec![dx]
        })
    })
}

fn softmax_slice(x: &[f64], out: &mut [f64]) {
    let m = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut z = 0.0;
    for (o, v) in out.iter_mut().zip(x) {
        *o = libm::exp(v - m);
        z += *o;
    }
    for o in out.iter_mut() {
        *o /= z;
    }
}

fn softmax_back(g: &[f64], y: &[f64], out: &mut [f64]) {
    let dot: f64 = g.iter().zip(y).map(|(g, y)| g * y).sum();
    for ((o, g), y) in out.iter_mut().zip(g).zip(y) {
        *o = y * (g - dot);
    }
}

pub fn softmax_vec(t: &mut Tape, x: NodeId) -> NodeId {
    let xv = t.value(x);
    let n = xv.len();
    let mut data = vec![0.0; n];
    softmax_slice(xv.data(), &mut data);
    t.push(Tensor::vector(data), vec![x], move || {
        Box::new(move |g, out| {
            let mut dx = vec![0.0; n];
            softmax_back(g.data(), out.data(), &mut dx);
            vec![Tensor::vector(dx)]
        })
    })
}

/// Row-wise softmax of a rank-2 tensor.
pub fn softmax_rows(t: &mut Tape, x: NodeId) -> NodeId {
    let xv = t.value(x);
    let (r, c) = (xv.rows(), xv.cols());
    let mut out = Tensor::zeros(&[r, c]);
    for i in 0..r {
        softmax_slice(&xv.data()[i * c..(i + 1) * c], &mut out.data_mut()[i * c..(i + 1) * c]);
    }
    t.push(out, vec![x], move || {
        Box::new(move |g, out| {
            let mut dx = Tensor::zeros(&[r, c]);
            for i in 0..r {
                let mut tmp = vec![0.0; c];
                softmax_back(&g.data()[i * c..(i + 1) * c], &out.data()[i * c..(i + 1) * c], &mut tmp);
                dx.data_mut()[i * c..(i + 1) * c].copy_from_slice(&tmp);
            }
            vec![dx]
        })
    })
}

/// Row i of x scaled by a[i]: x (L, C), a (L).
pub fn scale_rows(t: &mut Tape, x: NodeId, a: NodeId) -> NodeId {
    let (xv, av) = (t.value(x).clone(), t.value(a).clone());
    let (l, c) = (xv.rows(), xv.cols());
    assert_eq!(av.len(), l, "scale_rows weight length");
    let mut out = Tensor::zeros(&[l, c]);
    for i in 0..l {
        for ch in 0..c {
            out.data_mut()[i * c + ch] = av.data()[i] * xv.data()[i * c + ch];
        }
    }
    t.push(out, vec![x, a], move || {
        Box::new(move |g, _| {
            let mut dx = Tensor::zeros(&[l, c]);
            let mut da = Tensor::zeros(&[l]);
            for i in 0..l {
                let mut acc = 0.0;
                for ch in 0..c {
                    dx.data_mut()[i * c + ch] = av.data()[i] * g.data()[i * c + ch];
                    acc += g.data()[i * c + ch] * xv.data()[i * c + ch];
                }
                da.data_mut()[i] = acc;
            }
            vec![dx, da]
        })
    })
}

/// Vector times a 1-element tensor, broadcast.
pub fn mul_vs(t: &mut Tape, x: NodeId, s: NodeId) -> NodeId {
    let (xv, sv) = (t.value(x).clone(), t.value(s).clone());
    assert_eq!(sv.len(), 1, "mul_vs scalar operand");
    let sc = sv.item();
    let data = xv.data().iter().map(|v| v * sc).collect();
    t.push(Tensor::from_vec(xv.dims(), data), vec![x, s], move || {
        Box::new(move |g, _| {
            let dx = g.data().iter().map(|g| g * sc).collect();
            let ds: f64 = g.data().iter().zip(xv.data()).map(|(g, x)| g * x).sum();
            vec![Tensor::from_vec(g.dims(), dx), Tensor::scalar(ds)]
        })
    })
}

/// Inner product as a 1-element tensor.
pub fn dot(t: &mut Tape, a: NodeId, b: NodeId) -> NodeId {
    let p = mul(t, a, b);
    sum(t, p)
}

/// w . x + b for vectors: w (dout, din), x (din), b (dout).
pub fn affine_vec(t: &mut Tape, w: NodeId, x: NodeId, b: NodeId) -> NodeId {
    let y = matvec(t, w, x);
    add(t, y, b)
}

/// Cosine similarity of v against every row of m, with eps added to each
/// norm: m (r, u), v (u) -> (r).
pub fn cos_rows(t: &mut Tape, m: NodeId, v: NodeId, eps: f64) -> NodeId {
    let dots = matvec(t, m, v);
    let m2 = mul(t, m, m);
    let rn2 = rowsum(t, m2);
    let rn = sqrt(t, rn2);
    let rn_eps = add_const(t, rn, eps);
    let v2 = mul(t, v, v);
    let vn2 = sum(t, v2);
    let vn = sqrt(t, vn2);
    let vn_eps = add_const(t, vn, eps);
    let denom = mul_vs(t, rn_eps, vn_eps);
    div(t, dots, denom)
}
