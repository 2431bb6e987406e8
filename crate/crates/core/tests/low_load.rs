//! Below critical load the relaxed optimum is claimed to be `floor(T)` at
//! every point of the scan grids.

use allocopt::relaxation::{budget_grid, probability_grid, solve_p2, LoadRegime};
use allocopt::{NStar, SystemParams};

#[test]
fn relaxed_optimum_below_critical_load_is_floor_t() {
    let mut report = Vec::new();
    for n in [10usize, 20, 45] {
        let mut off = 0;
        let mut total = 0;
        let mut first = None;
        for p in probability_grid(1e-3) {
            for t in budget_grid(n, 0.1) {
                let prm = SystemParams::new(n, p, t).unwrap();
                if LoadRegime::of(&prm) != LoadRegime::Below {
                    continue;
                }
                total += 1;
                let got = solve_p2(&prm).unwrap().n_star;
                if got != NStar::Single(t.floor() as usize) {
                    off += 1;
                    first.get_or_insert((p, t, got));
                }
            }
        }
        if off > 0 {
            report.push(format!("N={n}: {off}/{total} points, first {first:?}"));
        }
    }
    assert!(report.is_empty(), "{}", report.join("; "));
}
