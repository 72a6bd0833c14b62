use bipartite_core::boundary::{boundary_generic_cost, boundary_matching_cost};
use bipartite_core::estimators::{boundary_lower_bound, partition_upper_bound};
use bipartite_core::functional::Functional;
use bipartite_core::geometry::{boundary_dist, dyadic_partition, union_diameter, BoxRegion, PointCloud};
use bipartite_core::graph::{generic_cost, tsp_exact_dp, BipartiteGraph, GraphFamily};
use bipartite_core::matching::{m_p_cost, CostParams};
use bipartite_core::sampling::{MeasureSampler, MeasureSpec};
use proptest::prelude::*;

fn cloud(d: usize, rows: Vec<Vec<f64>>) -> PointCloud {
    PointCloud::from_rows(d, rows).unwrap()
}

/// Two clouds in `[0,1)^d` with the given side-size range.
fn pair(max: usize) -> impl Strategy<Value = (usize, PointCloud, PointCloud)> {
    (1usize..=3).prop_flat_map(move |d| {
        let pt = prop::collection::vec(0.0..1.0f64, d);
        (
            Just(d),
            prop::collection::vec(pt.clone(), 0..=max),
            prop::collection::vec(pt, 0..=max),
        )
            .prop_map(|(d, a, b)| (d, cloud(d, a), cloud(d, b)))
    })
}

fn balanced(max: usize) -> impl Strategy<Value = (usize, PointCloud, PointCloud)> {
    (1usize..=3, 1..=max).prop_flat_map(|(d, n)| {
        let pt = prop::collection::vec(0.0..1.0f64, d);
        (
            Just(d),
            prop::collection::vec(pt.clone(), n),
            prop::collection::vec(pt, n),
        )
            .prop_map(|(d, a, b)| (d, cloud(d, a), cloud(d, b)))
    })
}

fn p_value() -> impl Strategy<Value = f64> {
    prop_oneof![Just(0.5), Just(1.0), Just(2.0), 0.25..3.0f64]
}

fn close(a: f64, b: f64, rtol: f64) -> bool {
    (a - b).abs() <= rtol * a.abs().max(b.abs()).max(1e-300)
}

/// Minimum over injections of the smaller side, by dynamic programming over
/// subsets of the larger side.
fn subset_dp(x: &PointCloud, y: &PointCloud, p: f64) -> f64 {
    let (a, b) = if x.len() <= y.len() { (x, y) } else { (y, x) };
    let (m, n) = (a.len(), b.len());
    let mut dp = vec![f64::INFINITY; 1 << n];
    dp[0] = 0.0;
    for mask in 0usize..1 << n {
        let i = mask.count_ones() as usize;
        if i >= m || !dp[mask].is_finite() {
            continue;
        }
        for j in 0..n {
            if mask & 1 << j == 0 {
                let d: f64 = a.get(i).iter().zip(b.get(j)).map(|(u, v)| (u - v) * (u - v)).sum();
                let c = dp[mask] + d.sqrt().powf(p);
                let next = mask | 1 << j;
                if c < dp[next] {
                    dp[next] = c;
                }
            }
        }
    }
    (0usize..1 << n)
        .filter(|mask| mask.count_ones() as usize == m)
        .map(|mask| dp[mask])
        .fold(f64::INFINITY, f64::min)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn boundary_distance_at_most_half_diameter(d in 1usize..=4, sides in prop::collection::vec(0.1..5.0f64, 4), u in prop::collection::vec(0.0..=1.0f64, 4)) {
        let lo = vec![-1.0; d];
        let hi: Vec<f64> = (0..d).map(|k| -1.0 + sides[k]).collect();
        let s = BoxRegion::from_bounds(lo.clone(), hi.clone()).unwrap();
        let x: Vec<f64> = (0..d).map(|k| lo[k] + u[k] * sides[k]).collect();
        let bd = boundary_dist(&x, &s).unwrap();
        prop_assert!(bd >= 0.0);
        prop_assert!(bd <= s.diameter() / 2.0 + 1e-12);
    }

    #[test]
    fn dyadic_cells_cover_once(d in 1usize..=3, level in 0u32..=3, u in prop::collection::vec(0.0..1.0f64, 3)) {
        let root = BoxRegion::from_bounds(vec![0.0; d], vec![2.0; d]).unwrap();
        let part = dyadic_partition(&root, level).unwrap();
        let x: Vec<f64> = u[..d].iter().map(|v| 2.0 * v).collect();
        let hits = part.cells().iter().filter(|c| c.contains_half_open(&x)).count();
        prop_assert_eq!(hits, 1);
        prop_assert_eq!(part.cell_of(&x).map(|c| part.cells()[c].contains_half_open(&x)), Some(true));
        let vol: f64 = part.cells().iter().map(BoxRegion::volume).sum();
        prop_assert!((vol - root.volume()).abs() <= 1e-12 * root.volume());
    }

    #[test]
    fn same_seed_same_cloud(seed in any::<u64>(), stream in any::<u32>(), n in 1.0..200.0f64) {
        let s = MeasureSampler::new(&MeasureSpec::unit_cube(3)).unwrap();
        let a = s.sample_pair(n, true, seed, stream as u64).unwrap();
        let b = s.sample_pair(n, true, seed, stream as u64).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn segment_samples_on_segment(seed in any::<u64>(), a in prop::array::uniform3(-2.0..2.0f64), b in prop::array::uniform3(-2.0..2.0f64)) {
        prop_assume!(a.iter().zip(&b).any(|(u, v)| (u - v).abs() > 1e-3));
        let s = MeasureSampler::new(&MeasureSpec::SingularSegment { a: a.to_vec(), b: b.to_vec() }).unwrap();
        let (x, y) = s.sample_pair(50.0, false, seed, 0).unwrap();
        let ab: Vec<f64> = (0..3).map(|k| b[k] - a[k]).collect();
        let len2: f64 = ab.iter().map(|v| v * v).sum();
        for pt in x.iter().chain(y.iter()) {
            let t = (0..3).map(|k| (pt[k] - a[k]) * ab[k]).sum::<f64>() / len2;
            prop_assert!((-1e-12..=1.0 + 1e-12).contains(&t));
            let off: f64 = (0..3).map(|k| (pt[k] - a[k] - t * ab[k]).powi(2)).sum::<f64>().sqrt();
            prop_assert!(off <= 1e-12);
        }
    }

    #[test]
    fn matching_homogeneous((d, x, y) in pair(6), p in p_value(), li in 0usize..3, shift in prop::collection::vec(-3.0..3.0f64, 3)) {
        let lambda = [0.5, 2.0, 7.0][li];
        let params = CostParams::with_p(p).unwrap();
        let base = m_p_cost(&x, &y, &params).unwrap().cost;
        let moved = m_p_cost(&x.affine(&shift[..d], lambda).unwrap(), &y.affine(&shift[..d], lambda).unwrap(), &params).unwrap().cost;
        prop_assert!(close(moved, lambda.powf(p) * base, 1e-9), "{} vs {}", moved, lambda.powf(p) * base);
    }

    #[test]
    fn matching_symmetric_and_bounded((_d, x, y) in pair(8), p in p_value()) {
        let params = CostParams::with_p(p).unwrap();
        let a = m_p_cost(&x, &y, &params).unwrap();
        let b = m_p_cost(&y, &x, &params).unwrap();
        // Ties between optimal matchings may sum in a different order.
        prop_assert!(close(a.cost, b.cost, 1e-12), "{} vs {}", a.cost, b.cost);
        let diam = union_diameter(&[&x, &y]);
        prop_assert!(a.cost <= x.len().min(y.len()) as f64 * diam.powf(p) * (1.0 + 1e-12));
        prop_assert_eq!(a.matched.len(), x.len().min(y.len()));
    }

    #[test]
    fn matching_equals_subset_dp((_d, x, y) in pair(7), p in p_value()) {
        let params = CostParams::with_p(p).unwrap();
        let got = m_p_cost(&x, &y, &params).unwrap().cost;
        let want = if x.is_empty() || y.is_empty() { 0.0 } else { subset_dp(&x, &y, p) };
        prop_assert!(close(got, want, 1e-9) || (got - want).abs() < 1e-12, "{} vs {}", got, want);
    }

    #[test]
    fn matching_invariant_under_relabeling((_d, x, y) in balanced(7), p in p_value(), rot in 0usize..7) {
        let params = CostParams::with_p(p).unwrap();
        let n = x.len();
        let perm: Vec<usize> = (0..n).map(|i| (i + rot) % n).collect();
        let a = m_p_cost(&x, &y, &params).unwrap().cost;
        let b = m_p_cost(&x.select(&perm), &y, &params).unwrap().cost;
        prop_assert!(close(a, b, 1e-12));
    }

    #[test]
    fn generic_matching_is_m_p((_d, x, y) in pair(6), p in p_value()) {
        let params = CostParams::with_p(p).unwrap();
        let a = m_p_cost(&x, &y, &params).unwrap().cost;
        let b = generic_cost(&x, &y, &GraphFamily::matching(), &params).unwrap().cost;
        prop_assert_eq!(a, b);
    }

    #[test]
    fn tour_certificate_is_a_tour((_d, x, y) in balanced(6), p in p_value()) {
        let params = CostParams::with_p(p).unwrap();
        let tour = tsp_exact_dp(&x, &y, &params).unwrap();
        let n = x.len();
        if n >= 2 {
            let g = BipartiteGraph::new(n, tour.matched.iter().copied()).unwrap();
            prop_assert!(g.is_member(&GraphFamily::tsp()));
        }
        // A single pair has no tour, so T_p = 0 there.
        if n >= 2 {
            let m = m_p_cost(&x, &y, &params).unwrap().cost;
            prop_assert!(tour.cost >= m * (1.0 - 1e-12));
        }
    }

    #[test]
    fn tree_certificate_is_a_member((_d, x, y) in balanced(4), k in 2usize..=3, p in p_value()) {
        let fam = GraphFamily::spanning_tree(k).unwrap();
        let params = CostParams::with_p(p).unwrap();
        let r = generic_cost(&x, &y, &fam, &params).unwrap();
        if !r.matched.is_empty() {
            let g = BipartiteGraph::new(x.len(), r.matched.iter().copied()).unwrap();
            prop_assert!(g.is_member(&fam));
        }
    }

    #[test]
    fn tour_homogeneous((d, x, y) in balanced(5), p in p_value(), li in 0usize..3, shift in prop::collection::vec(-3.0..3.0f64, 3)) {
        let lambda = [0.5, 2.0, 7.0][li];
        let params = CostParams::with_p(p).unwrap();
        let base = tsp_exact_dp(&x, &y, &params).unwrap().cost;
        let moved = tsp_exact_dp(&x.affine(&shift[..d], lambda).unwrap(), &y.affine(&shift[..d], lambda).unwrap(), &params).unwrap().cost;
        prop_assert!(close(moved, lambda.powf(p) * base, 1e-9) || (moved - lambda.powf(p) * base).abs() < 1e-12);
    }

    #[test]
    fn boundary_without_eps_below_plain((_d, x, y) in balanced(4), p in p_value()) {
        let s = BoxRegion::unit(x.dim());
        let params = CostParams::with_p(p).unwrap();
        let plain = m_p_cost(&x, &y, &params).unwrap().cost;
        let with_boundary = boundary_matching_cost(&x, &y, &params, &s).unwrap().cost;
        prop_assert!(with_boundary <= plain + 1e-12);
        let tsp = GraphFamily::tsp();
        if (2..=3).contains(&x.len()) {
            let plain = tsp_exact_dp(&x, &y, &params).unwrap().cost;
            let generic = boundary_generic_cost(&x, &y, &tsp, &params, &s, x.len() + y.len() + 2).unwrap().cost;
            prop_assert!(generic <= plain * (1.0 + 1e-12) + 1e-12);
        }
    }

    #[test]
    fn boundary_superadditive((_d, x, y) in pair(6), p in p_value(), level in 1u32..=2) {
        let root = BoxRegion::unit(x.dim());
        let params = CostParams::with_p(p).unwrap();
        let b = boundary_lower_bound(&x, &y, &root, level, &params).unwrap();
        prop_assert!(b.holds);
        prop_assert!(b.bound <= b.root_cost + 1e-9);
    }

    #[test]
    fn boundary_monotone_in_eps((_d, x, y) in pair(5), p in p_value(), e1 in 0.0..0.5f64, e2 in 0.0..0.5f64) {
        let s = BoxRegion::unit(x.dim());
        let (lo, hi) = if e1 <= e2 { (e1, e2) } else { (e2, e1) };
        let a = boundary_matching_cost(&x, &y, &CostParams::new(p, lo).unwrap(), &s).unwrap().cost;
        let b = boundary_matching_cost(&x, &y, &CostParams::new(p, hi).unwrap(), &s).unwrap().cost;
        prop_assert!(a <= b + 1e-12);
    }

    #[test]
    fn boundary_single_insertion((d, x, y) in pair(5), p in p_value(), extra in prop::collection::vec(0.0..1.0f64, 3), to_x in any::<bool>()) {
        let s = BoxRegion::unit(d);
        let params = CostParams::with_p(p).unwrap();
        let before = boundary_matching_cost(&x, &y, &params, &s).unwrap().cost;
        let (mut x2, mut y2) = (x.clone(), y.clone());
        if to_x { x2.push(&extra[..d]).unwrap() } else { y2.push(&extra[..d]).unwrap() }
        let after = boundary_matching_cost(&x2, &y2, &params, &s).unwrap().cost;
        prop_assert!((after - before).abs() <= s.diameter().powf(p) + 1e-12);
    }

    #[test]
    fn partition_bound_holds((_d, x, y) in pair(6), p in p_value(), level in 0u32..=2) {
        let root = BoxRegion::unit(x.dim());
        let params = CostParams::with_p(p).unwrap();
        let b = partition_upper_bound(&x, &y, &root, level, &Functional::Matching, &params, None).unwrap();
        prop_assert!(b.holds);
        prop_assert!(b.root_cost <= b.bound + 1e-9);
    }
}
