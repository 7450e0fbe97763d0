//! Per-node curvature kernel for the flow right-hand sides, batched over
//! lanes of eight fiber-consecutive nodes.
//!
//! Operates on the order-4 partial tables of F² (produced by the per-angle
//! spectral assembly) with stack-allocated order-2 and order-1 jets in the
//! four variables (x1, x2, y1, y2); every jet coefficient carries one value
//! per lane, so the arithmetic vectorizes. The generic jet pipeline is the
//! reference implementation; this path is validated against it in tests.

use std::sync::OnceLock;

use crate::jet::{index_table, MultiIndex};

pub const N44: usize = 70;
pub const N42: usize = 15;
pub const N41: usize = 5;
/// Lane width: nodes processed per kernel call (divides every fiber size).
pub const LANES: usize = 8;

pub(crate) type V = [f64; LANES];
type VJ2 = [V; N42];
type VJ1 = [V; N41];

pub(crate) const VZERO: V = [0.0; LANES];

/// Leibniz pairs of the graded (4 vars, order 2) table, known at compile
/// time so the product compiles to straight-line fused multiply-adds. The
/// enumeration is ranks 0..15 = const, x1, x2, y1, y2, x1², x1x2, x1y1,
/// x1y2, x2², x2y1, x2y2, y1², y1y2, y2²; checked against the runtime table
/// in tests.
const MUL15_PAIRS: [(usize, usize, usize, f64); 45] = [
    (0, 0, 0, 1.0),
    (1, 0, 1, 1.0),
    (1, 1, 0, 1.0),
    (2, 0, 2, 1.0),
    (2, 2, 0, 1.0),
    (3, 0, 3, 1.0),
    (3, 3, 0, 1.0),
    (4, 0, 4, 1.0),
    (4, 4, 0, 1.0),
    (5, 0, 5, 1.0),
    (5, 1, 1, 2.0),
    (5, 5, 0, 1.0),
    (6, 0, 6, 1.0),
    (6, 1, 2, 1.0),
    (6, 2, 1, 1.0),
    (6, 6, 0, 1.0),
    (7, 0, 7, 1.0),
    (7, 1, 3, 1.0),
    (7, 3, 1, 1.0),
    (7, 7, 0, 1.0),
    (8, 0, 8, 1.0),
    (8, 1, 4, 1.0),
    (8, 4, 1, 1.0),
    (8, 8, 0, 1.0),
    (9, 0, 9, 1.0),
    (9, 2, 2, 2.0),
    (9, 9, 0, 1.0),
    (10, 0, 10, 1.0),
    (10, 2, 3, 1.0),
    (10, 3, 2, 1.0),
    (10, 10, 0, 1.0),
    (11, 0, 11, 1.0),
    (11, 2, 4, 1.0),
    (11, 4, 2, 1.0),
    (11, 11, 0, 1.0),
    (12, 0, 12, 1.0),
    (12, 3, 3, 2.0),
    (12, 12, 0, 1.0),
    (13, 0, 13, 1.0),
    (13, 3, 4, 1.0),
    (13, 4, 3, 1.0),
    (13, 13, 0, 1.0),
    (14, 0, 14, 1.0),
    (14, 4, 4, 2.0),
    (14, 14, 0, 1.0),
];

pub(crate) struct KTables {
    /// gather maps into the (4,4) table: order-2 jet of ∂²F²/∂y_i∂y_j
    g_map: [[u16; N42]; 3],
    /// order-2 jet of ∂²F²/∂y_h∂x_j
    tx_map: [[[u16; N42]; 2]; 2],
    /// order-2 jet of ∂F²/∂x_h
    xh_map: [[u16; N42]; 2],
    /// order-1 jet from an order-2 jet: shift by e_{x_j} / e_{y_j}
    shift5x: [[u16; N41]; 2],
    shift5y: [[u16; N41]; 2],
    /// product with the coordinate jet y_j: (src, dst, multiplicity)
    seedy: [Vec<(u16, u16, f64)>; 2],
    /// ranks of first/second partials inside the 15-table
    r15_x: [usize; 2],
    r15_y: [usize; 2],
    r15_xy: [[usize; 2]; 2],
    r15_yy: [[usize; 2]; 2],
    /// ranks of ∂F²/∂y_k inside the 70-table
    r44_y: [usize; 2],
}

#[inline(always)]
fn pair_sym(i: usize, j: usize) -> usize {
    // (0,0) -> 0, (0,1)/(1,0) -> 1, (1,1) -> 2
    i + j
}

pub(crate) fn ktables() -> &'static KTables {
    static T: OnceLock<KTables> = OnceLock::new();
    T.get_or_init(|| {
        let t44 = index_table(4, 4);
        let t42 = index_table(4, 2);
        let mut g_map = [[0u16; N42]; 3];
        let mut tx_map = [[[0u16; N42]; 2]; 2];
        let mut xh_map = [[0u16; N42]; 2];
        for r in 0..N42 {
            for i in 0..2 {
                for j in i..2 {
                    let q = t44.up_rank(t44.up_rank(r, 2 + i).unwrap(), 2 + j).unwrap();
                    g_map[pair_sym(i, j)][r] = q as u16;
                }
                for j in 0..2 {
                    let q = t44.up_rank(t44.up_rank(r, 2 + i).unwrap(), j).unwrap();
                    tx_map[i][j][r] = q as u16;
                }
                xh_map[i][r] = t44.up_rank(r, i).unwrap() as u16;
            }
        }
        let mut shift5x = [[0u16; N41]; 2];
        let mut shift5y = [[0u16; N41]; 2];
        for r in 0..N41 {
            for j in 0..2 {
                shift5x[j][r] = t42.up_rank(r, j).unwrap() as u16;
                shift5y[j][r] = t42.up_rank(r, 2 + j).unwrap() as u16;
            }
        }
        let seedy = [0, 1].map(|j| {
            let mut v = Vec::new();
            for r in 0..N42 {
                if let Some(up) = t42.up_rank(r, 2 + j) {
                    let mult = t42.indices()[up].exp(2 + j) as f64;
                    v.push((r as u16, up as u16, mult));
                }
            }
            v
        });
        let rank15 = |exps: [usize; 4]| t42.rank_of(&MultiIndex::new(&exps)).unwrap();
        let r15_x = [rank15([1, 0, 0, 0]), rank15([0, 1, 0, 0])];
        let r15_y = [rank15([0, 0, 1, 0]), rank15([0, 0, 0, 1])];
        let mut r15_xy = [[0usize; 2]; 2];
        let mut r15_yy = [[0usize; 2]; 2];
        for j in 0..2 {
            for k in 0..2 {
                let mut e = [0usize; 4];
                e[j] += 1;
                e[2 + k] += 1;
                r15_xy[j][k] = rank15(e);
                let mut e = [0usize; 4];
                e[2 + j] += 1;
                e[2 + k] += 1;
                r15_yy[j][k] = rank15(e);
            }
        }
        let r44_y = [
            t44.rank_of(&MultiIndex::new(&[0, 0, 1, 0])).unwrap(),
            t44.rank_of(&MultiIndex::new(&[0, 0, 0, 1])).unwrap(),
        ];
        KTables {
            g_map,
            tx_map,
            xh_map,
            shift5x,
            shift5y,
            seedy,
            r15_x,
            r15_y,
            r15_xy,
            r15_yy,
            r44_y,
        }
    })
}

#[inline(always)]
fn vmul_add(out: &mut V, a: &V, b: &V, w: f64) {
    for l in 0..LANES {
        out[l] = (w * a[l]).mul_add(b[l], out[l]);
    }
}

/// Start offset of each target's pair run inside `MUL15_PAIRS` (the table is
/// sorted by target); lets the product accumulate each output in registers.
const MUL15_RUNS: [usize; N42 + 1] = [
    0, 1, 3, 5, 7, 9, 12, 16, 20, 24, 27, 31, 35, 38, 42, 45,
];

#[inline(always)]
fn mul15(a: &VJ2, b: &VJ2) -> VJ2 {
    let mut out = [VZERO; N42];
    for tr in 0..N42 {
        let mut acc = VZERO;
        for q in MUL15_RUNS[tr]..MUL15_RUNS[tr + 1] {
            let (_, ra, rb, w) = MUL15_PAIRS[q];
            vmul_add(&mut acc, &a[ra], &b[rb], w);
        }
        out[tr] = acc;
    }
    out
}

#[inline(always)]
fn mul5(a: &VJ1, b: &VJ1) -> VJ1 {
    let mut out = [VZERO; N41];
    for l in 0..LANES {
        out[0][l] = a[0][l] * b[0][l];
    }
    for r in 1..N41 {
        for l in 0..LANES {
            out[r][l] = a[0][l].mul_add(b[r][l], a[r][l] * b[0][l]);
        }
    }
    out
}

#[inline(always)]
fn axpy15(out: &mut VJ2, a: &VJ2, w: f64) {
    for (o, v) in out.iter_mut().zip(a) {
        for l in 0..LANES {
            o[l] = w.mul_add(v[l], o[l]);
        }
    }
}

/// 1/a as an order-2 jet via Horner composition.
#[inline(always)]
fn recip15(a: &VJ2) -> VJ2 {
    let mut r = VZERO;
    let mut d1 = VZERO;
    let mut d2h = VZERO;
    for l in 0..LANES {
        let v = 1.0 / a[0][l];
        r[l] = v;
        d1[l] = -v * v;
        d2h[l] = v * v * v;
    }
    let mut abar = *a;
    abar[0] = VZERO;
    let mut acc = [VZERO; N42];
    for (row, ab) in acc.iter_mut().zip(abar.iter()) {
        for l in 0..LANES {
            row[l] = ab[l] * d2h[l];
        }
    }
    for l in 0..LANES {
        acc[0][l] += d1[l];
    }
    let mut out = mul15(&acc, &abar);
    for l in 0..LANES {
        out[0][l] += r[l];
    }
    out
}

#[inline(always)]
fn gather15(f2p: &[V; N44], map: &[u16; N42], scale: f64) -> VJ2 {
    let mut out = [VZERO; N42];
    for (o, &ix) in out.iter_mut().zip(map) {
        let src = unsafe { f2p.get_unchecked(ix as usize) };
        for l in 0..LANES {
            o[l] = scale * src[l];
        }
    }
    out
}

#[inline(always)]
fn shift5(src: &VJ2, map: &[u16; N41], scale: f64) -> VJ1 {
    let mut out = [VZERO; N41];
    for (o, &ix) in out.iter_mut().zip(map) {
        let s = unsafe { src.get_unchecked(ix as usize) };
        for l in 0..LANES {
            o[l] = scale * s[l];
        }
    }
    out
}

#[inline(always)]
fn trunc5(a: &VJ2) -> VJ1 {
    [a[0], a[1], a[2], a[3], a[4]]
}

/// Product with the coordinate jet of y_j (per-lane value `val`, unit slope).
#[inline(always)]
fn seed_mul(t: &KTables, a: &VJ2, j: usize, val: &V) -> VJ2 {
    let mut out = [VZERO; N42];
    for (o, av) in out.iter_mut().zip(a.iter()) {
        for l in 0..LANES {
            o[l] = av[l] * val[l];
        }
    }
    for &(src, dst, mult) in &t.seedy[j] {
        let (s, d) = (src as usize, dst as usize);
        for l in 0..LANES {
            out[d][l] = mult.mul_add(a[s][l], out[d][l]);
        }
    }
    out
}

/// Scalar per-lane results the flows need.
pub(crate) struct NodeOut {
    /// F² at the nodes (r = 1), i.e. W.
    pub w: V,
    /// g11, g12, g22 values.
    pub g: [V; 3],
    /// Ricci scalar.
    pub ric: V,
    /// min eigenvalue of g.
    pub min_eig: V,
}

pub(crate) struct NodeConn {
    pub out: NodeOut,
    g15: [VJ2; 3],
    dinv15: VJ2,
    spray15: [VJ2; 2],
}

/// Metric, spray, and Ricci scalar for one lane block from the order-4
/// partial tables of F². Returns the first bad lane and its eigenvalue on
/// degeneracy.
pub(crate) fn node_conn(f2p: &[V; N44], y: &[V; 2]) -> Result<NodeConn, (usize, f64)> {
    let t = ktables();
    let g11 = gather15(f2p, &t.g_map[0], 0.5);
    let g12 = gather15(f2p, &t.g_map[1], 0.5);
    let g22 = gather15(f2p, &t.g_map[2], 0.5);

    let mut min_eig = VZERO;
    for l in 0..LANES {
        let tr = g11[0][l] + g22[0][l];
        let disc = (0.25 * (g11[0][l] - g22[0][l]) * (g11[0][l] - g22[0][l])
            + g12[0][l] * g12[0][l])
            .sqrt();
        min_eig[l] = 0.5 * tr - disc;
        let det = g11[0][l] * g22[0][l] - g12[0][l] * g12[0][l];
        if !(det > 0.0 && g11[0][l] > 0.0 && min_eig[l].is_finite()) {
            return Err((l, min_eig[l]));
        }
    }

    let det = {
        let a = mul15(&g11, &g22);
        let b = mul15(&g12, &g12);
        let mut d = a;
        axpy15(&mut d, &b, -1.0);
        d
    };
    let dinv = recip15(&det);

    // T_h = ∂²F²/∂y_h∂x_j y^j − ∂F²/∂x_h as order-2 jets
    let mut tvec = [[VZERO; N42]; 2];
    for (h, tv) in tvec.iter_mut().enumerate() {
        let mut acc = gather15(f2p, &t.xh_map[h], -1.0);
        for j in 0..2 {
            let mixed = gather15(f2p, &t.tx_map[h][j], 1.0);
            let prod = seed_mul(t, &mixed, j, &y[j]);
            axpy15(&mut acc, &prod, 1.0);
        }
        *tv = acc;
    }

    // adjugate rows contracted with T, then the shared 1/det
    let u0 = {
        let a = mul15(&g22, &tvec[0]);
        let b = mul15(&g12, &tvec[1]);
        let mut s = a;
        axpy15(&mut s, &b, -1.0);
        s
    };
    let u1 = {
        let a = mul15(&g12, &tvec[0]);
        let b = mul15(&g11, &tvec[1]);
        let mut s = b;
        axpy15(&mut s, &a, -1.0);
        s
    };
    let mut spray0 = mul15(&u0, &dinv);
    let mut spray1 = mul15(&u1, &dinv);
    for row in spray0.iter_mut().chain(spray1.iter_mut()) {
        for l in 0..LANES {
            row[l] *= 0.25;
        }
    }
    let spray15 = [spray0, spray1];

    // reduced-curvature trace from spray derivatives
    let mut ric = VZERO;
    for i in 0..2 {
        let gi = &spray15[i];
        let k = i;
        let mut acc = VZERO;
        for l in 0..LANES {
            acc[l] = 2.0 * gi[t.r15_x[k]][l];
        }
        for j in 0..2 {
            let m_xy = &gi[t.r15_xy[j][k]];
            let m_yy = &gi[t.r15_yy[j][k]];
            let gyj = &gi[t.r15_y[j]];
            let gjyk = &spray15[j][t.r15_y[k]];
            let gj0 = &spray15[j][0];
            for l in 0..LANES {
                acc[l] -= y[j][l] * m_xy[l];
                acc[l] = (2.0 * gj0[l]).mul_add(m_yy[l], acc[l]);
                acc[l] -= gyj[l] * gjyk[l];
            }
        }
        for l in 0..LANES {
            ric[l] += acc[l] / f2p[0][l];
        }
    }

    Ok(NodeConn {
        out: NodeOut {
            w: f2p[0],
            g: [g11[0], g12[0], g22[0]],
            ric,
            min_eig,
        },
        g15: [g11, g12, g22],
        dinv15: dinv,
        spray15,
    })
}

/// Per-node background data for the gauge term: order-1 jets of the
/// background Chern coefficients, components [i][sym(p,q)], lane-major.
pub(crate) type BgGamma = [[VJ1; 3]; 2];

struct XiJets {
    xi: [VJ1; 2],
    nlc: [[VJ1; 2]; 2],
    chern: [[VJ1; 3]; 2],
}

/// Order-1 jets of ξ = g^{pq}(Γ̄ − Γ)^i_pq plus the N and Γ jets of the
/// evolving metric.
fn xi_jets(nc: &NodeConn, bg: &BgGamma) -> XiJets {
    let t = ktables();
    let mut nlc = [[[VZERO; N41]; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            nlc[i][j] = shift5(&nc.spray15[i], &t.shift5y[j], 0.5);
        }
    }
    let g5 = |p: usize, q: usize| -> &VJ2 { &nc.g15[pair_sym(p, q)] };
    // δ_k g_pq as order-1 jets
    let mut dg = [[[VZERO; N41]; 3]; 2];
    for k in 0..2 {
        for p in 0..2 {
            for q in p..2 {
                let mut d = shift5(g5(p, q), &t.shift5x[k], 1.0);
                for m in 0..2 {
                    let dys = shift5(g5(p, q), &t.shift5y[m], 1.0);
                    let corr = mul5(&nlc[m][k], &dys);
                    for (o, v) in d.iter_mut().zip(&corr) {
                        for l in 0..LANES {
                            o[l] -= v[l];
                        }
                    }
                }
                dg[k][pair_sym(p, q)] = d;
            }
        }
    }
    // g^{pq} as order-1 jets: adjugate times 1/det
    let dinv5 = trunc5(&nc.dinv15);
    let adj = [&nc.g15[2], &nc.g15[1], &nc.g15[0]];
    let mut ginv5 = [[VZERO; N41]; 3];
    for (s, (idx, a)) in ginv5.iter_mut().zip(adj.iter().enumerate()) {
        let mut a5 = trunc5(a);
        if idx == 1 {
            for row in a5.iter_mut() {
                for l in 0..LANES {
                    row[l] = -row[l];
                }
            }
        }
        *s = mul5(&a5, &dinv5);
    }
    let giv = |p: usize, q: usize| -> &VJ1 { &ginv5[pair_sym(p, q)] };
    let mut chern = [[[VZERO; N41]; 3]; 2];
    for i in 0..2 {
        for p in 0..2 {
            for q in p..2 {
                let mut acc = [VZERO; N41];
                for h in 0..2 {
                    let mut sym = dg[p][pair_sym(h, q)];
                    for (s, v) in sym.iter_mut().zip(&dg[q][pair_sym(p, h)]) {
                        for l in 0..LANES {
                            s[l] += v[l];
                        }
                    }
                    for (s, v) in sym.iter_mut().zip(&dg[h][pair_sym(p, q)]) {
                        for l in 0..LANES {
                            s[l] -= v[l];
                        }
                    }
                    let term = mul5(giv(i, h), &sym);
                    for (a, v) in acc.iter_mut().zip(&term) {
                        for l in 0..LANES {
                            a[l] = 0.5f64.mul_add(v[l], a[l]);
                        }
                    }
                }
                chern[i][pair_sym(p, q)] = acc;
            }
        }
    }
    let mut xi = [[VZERO; N41]; 2];
    for (i, slot) in xi.iter_mut().enumerate() {
        let mut acc = [VZERO; N41];
        for p in 0..2 {
            for q in 0..2 {
                let s = pair_sym(p, q);
                let mut diff = bg[i][s];
                for (d, v) in diff.iter_mut().zip(&chern[i][s]) {
                    for l in 0..LANES {
                        d[l] -= v[l];
                    }
                }
                let term = mul5(giv(p, q), &diff);
                for (a, v) in acc.iter_mut().zip(&term) {
                    for l in 0..LANES {
                        a[l] += v[l];
                    }
                }
            }
        }
        *slot = acc;
    }
    XiJets { xi, nlc, chern }
}

/// Contracted Lie-derivative term 2 y^i y^j ∇_j (g_ik ξ^k) per lane.
pub(crate) fn node_deturck(nc: &NodeConn, f2p: &[V; N44], y: &[V; 2], bg: &BgGamma) -> V {
    let t = ktables();
    let xj = xi_jets(nc, bg);
    let mut lie = VZERO;
    for j in 0..2 {
        for k in 0..2 {
            // ∇_j ξ^k = δ_j ξ^k + ξ^s Γ^k_sj
            let mut nab = xj.xi[k][1 + j];
            for m in 0..2 {
                for l in 0..LANES {
                    nab[l] -= xj.nlc[m][j][0][l] * xj.xi[k][3 + m][l];
                }
            }
            for s in 0..2 {
                for l in 0..LANES {
                    nab[l] = xj.xi[s][0][l].mul_add(xj.chern[k][pair_sym(s, j)][0][l], nab[l]);
                }
            }
            let dyf2 = &f2p[t.r44_y[k]];
            for l in 0..LANES {
                lie[l] = (y[j][l] * dyf2[l]).mul_add(nab[l], lie[l]);
            }
        }
    }
    lie
}

/// ξ and its base Jacobian ∂ξ^i/∂x^j per lane, for diffeomorphism
/// integration.
pub(crate) fn node_xi_jacobian(nc: &NodeConn, bg: &BgGamma) -> ([V; 2], [[V; 2]; 2]) {
    let xj = xi_jets(nc, bg);
    (
        [xj.xi[0][0], xj.xi[1][0]],
        [[xj.xi[0][1], xj.xi[0][2]], [xj.xi[1][1], xj.xi[1][2]]],
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn const_pair_table_matches_index_table() {
        let t42 = index_table(4, 2);
        let mut want = Vec::new();
        for target in 0..t42.len() {
            for &(a, b, w) in t42.mul_pairs_of(target) {
                want.push((target, a as usize, b as usize, w));
            }
        }
        let mut got: Vec<_> = MUL15_PAIRS.to_vec();
        let key = |x: &(usize, usize, usize, f64)| (x.0, x.1, x.2);
        got.sort_by_key(key);
        want.sort_by_key(key);
        assert_eq!(got.len(), want.len());
        for (g, w) in got.iter().zip(&want) {
            assert_eq!(key(g), key(w));
            assert_eq!(g.3, w.3);
        }
    }

    #[test]
    fn run_offsets_match_pair_table() {
        for tr in 0..N42 {
            for q in MUL15_RUNS[tr]..MUL15_RUNS[tr + 1] {
                assert_eq!(MUL15_PAIRS[q].0, tr);
            }
        }
        assert_eq!(MUL15_RUNS[N42], MUL15_PAIRS.len());
    }

    #[test]
    fn order1_table_is_value_slope_layout() {
        let t41 = index_table(4, 1);
        assert_eq!(t41.len(), N41);
        for v in 0..4 {
            assert_eq!(
                t41.rank_of(&MultiIndex::unit(4, v)).unwrap(),
                1 + v,
                "order-1 layout"
            );
        }
    }
}
