//! Synthetic prediction logs with a controllable gap between the
//! uncertainty of correct and erroneous generations.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::records::{PredictionRecord, TokenInfo};

/// Mean peak token entropy of correct generations.
pub const CORRECT_MEAN: f64 = 0.5;
/// Standard deviation of the peak entropy in both classes.
pub const SPREAD: f64 = 0.5;

const TABLES: &[(&str, &[&str])] = &[
    ("singer", &["name", "age", "country", "song_name"]),
    ("concert", &["concert_name", "theme", "year", "stadium_id"]),
    ("stadium", &["location", "capacity", "highest", "average"]),
    ("patients", &["subject_id", "gender", "dob", "expire_flag"]),
    ("admissions", &["hadm_id", "admittime", "insurance", "ethnicity"]),
];

fn random_query(rng: &mut ChaCha8Rng, conditions: usize) -> String {
    let (table, cols) = TABLES[rng.random_range(0..TABLES.len())];
    let select = cols[rng.random_range(0..cols.len())];
    let mut sql = format!("SELECT {select} FROM {table}");
    for k in 0..conditions {
        let col = cols[rng.random_range(0..cols.len())];
        sql.push_str(if k == 0 { " WHERE " } else { " AND " });
        if rng.random_bool(0.5) {
            sql.push_str(&format!("{col} > {}", rng.random_range(0..100)));
        } else {
            sql.push_str(&format!("{col} = 'v{}'", rng.random_range(0..20)));
        }
    }
    sql
}

/// Generates `n` labelled records. Each record's peak token entropy is
/// drawn from N(0.5, 0.5²) for correct generations or N(0.5 + separation,
/// 0.5²) for errors, clipped at 0; the other token entropies lie below the
/// peak, so the max-entropy score equals the drawn peak. Exactly
/// `round(error_rate * n)` records are errors.
pub fn make_synthetic(
    n: usize,
    separation: f64,
    error_rate: f64,
    seed: u64,
) -> Result<Vec<PredictionRecord>> {
    if n < 10 {
        return Err(Error::InvalidParameter(format!("n must be at least 10, got {n}")));
    }
    if !(separation >= 0.0 && separation.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "separation {separation} must be >= 0"
        )));
    }
    if !(0.0..=1.0).contains(&error_rate) {
        return Err(Error::InvalidParameter(format!(
            "error rate {error_rate} outside [0, 1]"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_errors = (error_rate * n as f64).round() as usize;
    let mut labels: Vec<u8> = (0..n).map(|i| u8::from(i < n_errors)).collect();
    labels.shuffle(&mut rng);

    let correct = Normal::new(CORRECT_MEAN, SPREAD).expect("valid normal");
    let wrong = Normal::new(CORRECT_MEAN + separation, SPREAD).expect("valid normal");

    Ok(labels
        .into_iter()
        .enumerate()
        .map(|(i, y)| {
            let peak = if y == 1 {
                wrong.sample(&mut rng)
            } else {
                correct.sample(&mut rng)
            }
            .max(0.0);
            let len = rng.random_range(4..=12);
            let peak_at = rng.random_range(0..len);
            let entropies: Vec<f64> = (0..len)
                .map(|l| {
                    if l == peak_at {
                        peak
                    } else {
                        peak * rng.random::<f64>()
                    }
                })
                .collect();
            let conditions = rng.random_range(0..=2) + usize::from(y);
            let pred_sql = random_query(&mut rng, conditions);
            let gold_sql = if y == 1 {
                random_query(&mut rng, conditions)
            } else {
                pred_sql.clone()
            };
            PredictionRecord {
                id: format!("syn-{i:05}"),
                question: format!("synthetic question {i}"),
                gold_sql,
                pred_sql,
                token_info: TokenInfo::TokenEntropies(entropies),
                label: Some(y),
                exec_results: None,
            }
        })
        .collect())
}
