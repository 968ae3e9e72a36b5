//! Seeded synthetic flight-delay data.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::storage::{ColumnKind, Relation, RelationBuilder, Schema, Value};

/// Measure columns, in order.
pub const MEASURES: [&str; 4] = ["delay", "taxi_out", "taxi_in", "air_time"];

#[derive(Clone, Debug, PartialEq)]
pub struct WorkloadConfig {
    /// Number of airports, one trend each.
    pub trends: usize,
    /// Days per airport.
    pub days: usize,
    /// Tuples per (airport, day).
    pub replicas: usize,
    /// Airports are drawn around this many shared curves when set, giving
    /// near-duplicate trends.
    pub clusters: Option<usize>,
    /// Amplitude of per-trend noise around a cluster curve.
    pub noise: f64,
    /// Round every measure to an integer.
    pub integral: bool,
    pub seed: u64,
}

impl Default for WorkloadConfig {
    fn default() -> Self {
        WorkloadConfig {
            trends: 100,
            days: 60,
            replicas: 2,
            clusters: None,
            noise: 0.5,
            integral: false,
            seed: 7,
        }
    }
}

pub fn flights_schema() -> Schema {
    let mut cols = vec![
        ("airport", ColumnKind::String),
        ("day", ColumnKind::Integer),
        ("week", ColumnKind::Integer),
        ("month", ColumnKind::Integer),
    ];
    cols.extend(MEASURES.iter().map(|m| (*m, ColumnKind::Float)));
    Schema::of(&cols)
}

pub fn airport_name(i: usize) -> String {
    format!("AP{i:05}")
}

/// Table `flights(airport, day, week, month, delay, taxi_out, taxi_in,
/// air_time)`. Each (airport, day) holds `replicas` tuples at the day's
/// mean plus or minus the trend's sample standard deviation, alternating
/// sign, so the per-day AVG is the mean.
pub fn generate(cfg: &WorkloadConfig) -> Relation {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let curves: Vec<Vec<[f64; 4]>> = match cfg.clusters {
        Some(c) => (0..c.max(1)).map(|_| curve(&mut rng, cfg.days)).collect(),
        None => Vec::new(),
    };
    let mut b = RelationBuilder::new("flights", flights_schema());
    for t in 0..cfg.trends {
        let base = match cfg.clusters {
            Some(_) => {
                let c = &curves[t % curves.len()];
                c.iter()
                    .map(|p| p.map(|v| v + rng.gen_range(-cfg.noise..=cfg.noise)))
                    .collect()
            }
            None => curve(&mut rng, cfg.days),
        };
        let airport = Value::str(&airport_name(t));
        let spread = sample_stdev(&base);
        for (day, means) in base.iter().enumerate() {
            for r in 0..cfg.replicas {
                let mut row = vec![
                    airport.clone(),
                    Value::Int(day as i64),
                    Value::Int(day as i64 / 7),
                    Value::Int(day as i64 / 30),
                ];
                // the last replica of an odd count sits on the mean
                let sign = if cfg.replicas % 2 == 1 && r + 1 == cfg.replicas {
                    0.0
                } else if r % 2 == 0 {
                    1.0
                } else {
                    -1.0
                };
                for (m, s) in means.iter().zip(&spread) {
                    let mut v = m + sign * s;
                    if cfg.integral {
                        v = v.round();
                    }
                    row.push(Value::Float(v));
                }
                b.push_row(&row).expect("row matches the flights schema");
            }
        }
    }
    b.finish()
}

/// Per-measure sample standard deviation of one trend's daily means.
fn sample_stdev(days: &[[f64; 4]]) -> [f64; 4] {
    let n = days.len() as f64;
    std::array::from_fn(|m| {
        if days.len() < 2 {
            return 0.0;
        }
        let mean = days.iter().map(|d| d[m]).sum::<f64>() / n;
        (days.iter().map(|d| (d[m] - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    })
}

/// Random walk per measure, clamped to plausible ranges.
fn curve(rng: &mut ChaCha8Rng, days: usize) -> Vec<[f64; 4]> {
    let mut v = [
        rng.gen_range(0.0..30.0),
        rng.gen_range(5.0..25.0),
        rng.gen_range(3.0..12.0),
        rng.gen_range(40.0..300.0),
    ];
    (0..days)
        .map(|_| {
            for (x, step) in v.iter_mut().zip([4.0f64, 2.0, 1.0, 10.0]) {
                *x = (*x + rng.gen_range(-step..=step)).max(0.0);
            }
            v
        })
        .collect()
}

/// GMPairs of the benchmark query: two measures over `day` and over
/// `week`, so pairs share grouping columns.
pub const BENCH_GMS: [&str; 4] = [
    "(day AS D, AVG(delay) AS V1)",
    "(D, AVG(taxi_out) AS V2)",
    "(week AS W, V1)",
    "(W, V2)",
];

/// Airport-against-airport comparison over the first `gms` benchmark
/// GMPairs, top `k` in the given direction.
pub fn bench_query(gms: usize, k: usize, ascending: bool) -> String {
    let n = gms.clamp(1, BENCH_GMS.len());
    format!(
        "SELECT * FROM flights COMPARE [(airport AS A1) <-> (airport AS A2)] [{}] \
         USING SUM OVER DIFF(2) AS score ORDER BY score {} LIMIT {k}",
        BENCH_GMS[..n].join(", "),
        if ascending { "ASC" } else { "DESC" }
    )
}
