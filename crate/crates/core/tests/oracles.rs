//! Independent reference implementations checked against the library.

use approx::assert_relative_eq;
use crowdtrack::evaluator::{density_stats, match_frame, MatchConfig, MatchState};
use crowdtrack::geometry::{bev_iou, Box3D, BoxBev, GridSpec};
use crowdtrack::targets::{
    focal_daw_loss, focal_loss, make_daw, make_heatmap, make_relationship_offsets, DenseGrid2D, GtObject, LossParams,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn obj(id: u64, x: f64, y: f64) -> GtObject<f64> {
    GtObject {
        instance_id: id,
        frame: 0,
        bbox: Box3D::new(x, y, 0.85, 0.6, 0.6, 1.7, 0.0).unwrap(),
    }
}

fn inside(b: &BoxBev<f64>, x: f64, y: f64) -> bool {
    let (s, c) = b.yaw.sin_cos();
    let (dx, dy) = (x - b.cx, y - b.cy);
    let u = c * dx + s * dy;
    let v = -s * dx + c * dy;
    u.abs() <= 0.5 * b.length && v.abs() <= 0.5 * b.width
}

fn monte_carlo_iou(a: &BoxBev<f64>, b: &BoxBev<f64>, n: usize, rng: &mut ChaCha8Rng) -> f64 {
    let r = |q: &BoxBev<f64>| 0.5 * q.length.hypot(q.width);
    let x0 = (a.cx - r(a)).min(b.cx - r(b));
    let x1 = (a.cx + r(a)).max(b.cx + r(b));
    let y0 = (a.cy - r(a)).min(b.cy - r(b));
    let y1 = (a.cy + r(a)).max(b.cy + r(b));
    let (mut both, mut either) = (0usize, 0usize);
    for _ in 0..n {
        let x = rng.gen_range(x0..x1);
        let y = rng.gen_range(y0..y1);
        let (ia, ib) = (inside(a, x, y), inside(b, x, y));
        both += usize::from(ia && ib);
        either += usize::from(ia || ib);
    }
    if either == 0 {
        0.0
    } else {
        both as f64 / either as f64
    }
}

#[test]
fn rotated_iou_agrees_with_sampling() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..40 {
        let mk = |rng: &mut ChaCha8Rng| {
            BoxBev::new(
                rng.gen_range(-0.5..0.5),
                rng.gen_range(-0.5..0.5),
                rng.gen_range(0.3..1.5),
                rng.gen_range(0.3..1.5),
                rng.gen_range(-3.1..3.1),
            )
            .unwrap()
        };
        let (a, b) = (mk(&mut rng), mk(&mut rng));
        let exact = bev_iou(&a, &b);
        let est = monte_carlo_iou(&a, &b, 200_000, &mut rng);
        assert!((exact - est).abs() < 0.01, "exact {exact} sampled {est} for {a:?} {b:?}");
    }
}

fn grid2() -> GridSpec<f64> {
    GridSpec::new(0.0, 2.0, 0.0, 2.0, 1.0, 1.0).unwrap()
}

#[test]
fn focal_loss_frozen_values() {
    let g = grid2();
    let pred = DenseGrid2D::from_values(g, vec![0.9, 0.2, 0.5, 0.05]).unwrap();
    let gt = DenseGrid2D::from_values(g, vec![1.0, 0.5, 0.0, 0.8]).unwrap();
    let w = DenseGrid2D::from_values(g, vec![3.0, 0.5, 2.0, 1.0]).unwrap();
    let p = LossParams::default();
    let (weighted, _) = focal_daw_loss(&pred, &gt, &w, &p).unwrap();
    let (plain, _) = focal_loss(&pred, &gt, &p).unwrap();
    assert_relative_eq!(weighted, 0.3502924698011705, max_relative = 1e-14);
    assert_relative_eq!(plain, 0.17489846434802767, max_relative = 1e-14);
}

/// Direct cell-by-cell evaluation of the weighted focal loss.
fn focal_oracle(pred: &[f64], gt: &[f64], w: &[f64], alpha: f64, gamma: f64, floor: f64) -> f64 {
    let mut sum = 0.0;
    let mut pos = 0usize;
    for i in 0..pred.len() {
        let p = pred[i].clamp(1e-7, 1.0 - 1e-7);
        let wi = w[i].max(floor);
        if gt[i] >= 1.0 {
            pos += 1;
            sum += -wi * (1.0 - p).powf(alpha) * p.ln();
        } else {
            sum += -wi * (1.0 - gt[i]).powf(gamma) * p.powf(alpha) * (1.0 - p).ln();
        }
    }
    sum / pos.max(1) as f64
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn focal_loss_matches_direct_sum(
        cells in proptest::collection::vec((0.0..1.0f64, 0u8..4, 0.0..4.0f64), 36),
        alpha in 0.0..3.0f64,
        gamma in 0.0..5.0f64,
    ) {
        let g = GridSpec::new(0.0, 6.0, 0.0, 6.0, 1.0, 1.0).unwrap();
        let pred: Vec<f64> = cells.iter().map(|c| c.0).collect();
        // A quarter of the cells are exact peaks.
        let gt: Vec<f64> = cells.iter().map(|c| if c.1 == 0 { 1.0 } else { c.0 * 0.9 }).collect();
        let w: Vec<f64> = cells.iter().map(|c| c.2).collect();
        let params = LossParams { alpha, gamma, ..LossParams::default() };
        let (loss, _) = focal_daw_loss(
            &DenseGrid2D::from_values(g, pred.clone()).unwrap(),
            &DenseGrid2D::from_values(g, gt.clone()).unwrap(),
            &DenseGrid2D::from_values(g, w.clone()).unwrap(),
            &params,
        ).unwrap();
        let oracle = focal_oracle(&pred, &gt, &w, alpha, gamma, 1.0);
        prop_assert!((loss - oracle).abs() <= 1e-12 * oracle.abs().max(1.0));
    }
}

#[test]
fn gradient_matches_finite_differences() {
    let g = GridSpec::new(0.0, 8.0, 0.0, 8.0, 1.0, 1.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let objs = [obj(1, 2.2, 3.1), obj(2, 5.5, 5.9), obj(3, 2.9, 3.4)];
    let gt = make_heatmap(&objs, &g, 1.0).unwrap();
    let w = make_daw(&objs, &g, 2.0).unwrap();
    let pred = DenseGrid2D::from_fn(g, |_, _| rng.gen_range(0.01..0.99));
    let p = LossParams::default();
    let (_, grad) = focal_daw_loss(&pred, &gt, &w, &p).unwrap();
    let h = 1e-5;
    for k in 0..8 {
        for j in 0..8 {
            let mut up = pred.clone();
            up.set(j, k, pred.get(j, k) + h);
            let mut dn = pred.clone();
            dn.set(j, k, pred.get(j, k) - h);
            let fd = (focal_daw_loss(&up, &gt, &w, &p).unwrap().0 - focal_daw_loss(&dn, &gt, &w, &p).unwrap().0) / (2.0 * h);
            let an = grad.get(j, k);
            assert!((fd - an).abs() <= 1e-4 * an.abs().max(1e-6), "cell ({j},{k}): fd {fd} analytic {an}");
        }
    }
}

#[test]
fn heatmap_and_weights_match_dense_evaluation() {
    let g = GridSpec::new(-6.0, 6.0, -3.0, 3.0, 0.6, 0.6).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let objs: Vec<_> = (0..12)
        .map(|i| obj(i, rng.gen_range(-5.9..5.9), rng.gen_range(-2.9..2.9)))
        .collect();
    let sigma = 1.3;
    let heat = make_heatmap(&objs, &g, sigma).unwrap();
    let daw = make_daw(&objs, &g, 2.0).unwrap();
    for k in 0..g.ny() {
        for j in 0..g.nx() {
            let mut h: f64 = 0.0;
            let mut count = 0.0;
            for o in &objs {
                let jc = ((o.bbox.cx + 6.0) / 0.6).floor();
                let kc = ((o.bbox.cy + 3.0) / 0.6).floor();
                let d2 = (j as f64 - jc).powi(2) + (k as f64 - kc).powi(2);
                h = h.max((-d2 / (sigma * sigma)).exp());
                let (px, py) = (-6.0 + j as f64 * 0.6, -3.0 + k as f64 * 0.6);
                if (px - o.bbox.cx).hypot(py - o.bbox.cy) < 2.0 {
                    count += 1.0;
                }
            }
            assert!((heat.get(j, k) - h).abs() <= 1e-15, "heatmap ({j},{k})");
            assert_eq!(daw.get(j, k), count, "weights ({j},{k})");
        }
    }
}

fn brute_nearest(objs: &[GtObject<f64>], i: usize) -> Option<(f64, usize)> {
    let mut best: Option<(f64, usize)> = None;
    for (j, o) in objs.iter().enumerate() {
        if j == i {
            continue;
        }
        let d = (o.bbox.cx - objs[i].bbox.cx).hypot(o.bbox.cy - objs[i].bbox.cy);
        let better = match best {
            None => true,
            Some((bd, bj)) => d < bd || (d == bd && o.instance_id < objs[bj].instance_id),
        };
        if better {
            best = Some((d, j));
        }
    }
    best
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn relationship_offsets_match_pairwise_scan(
        pts in proptest::collection::vec((-15.0..15.0f64, -15.0..15.0f64), 0..80)
    ) {
        let objs: Vec<_> = pts.iter().enumerate().map(|(i, &(x, y))| obj(i as u64 * 7 + 3, x, y)).collect();
        let rel = make_relationship_offsets(&objs, 3.0).unwrap();
        for (i, o) in objs.iter().enumerate() {
            let r = rel[&o.instance_id];
            match brute_nearest(&objs, i) {
                Some((d, j)) if d * d <= 9.0 => {
                    prop_assert!(r.defined);
                    prop_assert_eq!(r.rx, objs[j].bbox.cx - o.bbox.cx);
                    prop_assert_eq!(r.ry, objs[j].bbox.cy - o.bbox.cy);
                }
                _ => prop_assert!(!r.defined),
            }
        }
    }

    #[test]
    fn density_matches_pairwise_count(
        frames in proptest::collection::vec(proptest::collection::vec((-5.0..5.0f64, -5.0..5.0f64), 0..20), 1..4)
    ) {
        let gt: Vec<Vec<GtObject<f64>>> = frames
            .iter()
            .map(|f| f.iter().enumerate().map(|(i, &(x, y))| obj(i as u64, x, y)).collect())
            .collect();
        let (mut total, mut n) = (0usize, 0usize);
        for f in &gt {
            for a in f {
                n += 1;
                total += f.iter().filter(|b| b.instance_id != a.instance_id
                    && (a.bbox.cx - b.bbox.cx).hypot(a.bbox.cy - b.bbox.cy) < 2.0).count();
            }
        }
        match density_stats(&gt, 2.0) {
            Ok(got) => prop_assert!(n > 0 && (got - total as f64 / n as f64).abs() < 1e-12),
            Err(_) => prop_assert_eq!(n, 0),
        }
    }
}

/// Exhaustive maximum-total-IoU matching over pairs at or above threshold.
fn brute_best_iou(iou: &[Vec<f64>], th: f64) -> f64 {
    fn rec(r: usize, iou: &[Vec<f64>], used: &mut Vec<bool>, th: f64) -> f64 {
        if r == iou.len() {
            return 0.0;
        }
        let mut best = rec(r + 1, iou, used, th);
        for c in 0..used.len() {
            if !used[c] && iou[r][c] >= th {
                used[c] = true;
                best = best.max(iou[r][c] + rec(r + 1, iou, used, th));
                used[c] = false;
            }
        }
        best
    }
    let cols = iou.first().map_or(0, Vec::len);
    rec(0, iou, &mut vec![false; cols], th)
}

#[test]
fn first_frame_matching_maximizes_total_iou() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for _ in 0..300 {
        let ng = rng.gen_range(0..=6);
        let np = rng.gen_range(0..=6);
        let mk = |rng: &mut ChaCha8Rng| {
            BoxBev::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), 0.6, 0.6, rng.gen_range(-0.3..0.3)).unwrap()
        };
        let gts: Vec<(u64, BoxBev<f64>)> = (0..ng).map(|i| (i as u64, mk(&mut rng))).collect();
        let preds: Vec<(u64, BoxBev<f64>)> = (0..np).map(|i| (100 + i as u64, mk(&mut rng))).collect();
        let (fm, _) = match_frame(&gts, &preds, &MatchState::default(), 0, &MatchConfig::default()).unwrap();
        let iou: Vec<Vec<f64>> = gts.iter().map(|g| preds.iter().map(|p| bev_iou(&g.1, &p.1)).collect()).collect();
        let got: f64 = fm.matches.iter().map(|&(g, p)| iou[g][p]).sum();
        assert!((got - brute_best_iou(&iou, 0.5)).abs() < 1e-9);
        assert!(fm.matches.iter().all(|&(g, p)| iou[g][p] >= 0.5));
    }
}
