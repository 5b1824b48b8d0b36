//! Fixtures shared by the benchmarks.

use selsql::{make_synthetic, max_entropy_score};

/// `(max-entropy score, error label)` pairs from a synthetic log of `n`
/// records.
pub fn scored(n: usize, seed: u64) -> Vec<(f64, u8)> {
    make_synthetic(n, 1.5, 0.3, seed)
        .expect("synthetic log")
        .iter()
        .map(|r| (max_entropy_score(r).expect("score"), r.label.expect("label")))
        .collect()
}

/// Flips error labels to correctness labels, the form calibrators expect.
pub fn correctness(points: &[(f64, u8)]) -> Vec<(f64, u8)> {
    points.iter().map(|&(u, y)| (u, 1 - y)).collect()
}

pub const QUERIES: &[&str] = &[
    "SELECT name FROM singer WHERE age > 30",
    "SELECT T1.name, count(*) FROM concert AS T1 JOIN stadium AS T2 ON T1.stadium_id = T2.id \
     WHERE T2.capacity >= 5000 AND T1.year = '2014' GROUP BY T1.name ORDER BY count(*) DESC LIMIT 3",
    "SELECT avg(salary) FROM employee WHERE dept IN (SELECT id FROM dept WHERE city = \"Paris\")",
];
