#![allow(dead_code)]

use trendcompare::storage::{Catalog, ColumnKind, Relation, RelationBuilder, Schema, Value};

pub const ASIA_VS_PRODUCTS: &str = "SELECT R1, P, W, V, score FROM sales R \
    COMPARE [((R.region = Asia) AS R1) <-> (R1, R.product AS P)] \
    [R.week AS W, AVG (R.revenue) AS V] USING SUM OVER DIFF(2) AS score";

pub const ASIA_VS_INSPIRON_THREE_GMS: &str = "SELECT R1, P, W, C, M, V, O, score FROM sales R \
    COMPARE [((R.region = Asia) AS R1) <-> (R1, (R.product = 'Inspiron') AS P)] \
    [(R.week AS W, AVG(R.revenue) AS V), (R.country AS C, AVG(R.profit) AS O), (R.month AS M, V)] \
    USING SUM OVER DIFF(2) AS score";

pub const ASIA_VS_EUROPE_CITIES: &str = "SELECT R1, C1, R2, C2, W, V, score FROM sales R \
    COMPARE [((R.Region = Asia) AS R1, (R.city) AS C1) <-> ((R.Region = Europe) AS R2, (R.city) AS C2)] \
    [R.week AS W, AVG(R.revenue) AS V] USING SUM OVER DIFF(2) AS score";

pub const ASIA_VS_EUROPE_CITIES_THREE_GMS: &str = "SELECT R1, C1, R2, C2, W, C, M, V, O, score FROM sales R \
    COMPARE [((R.Region = Asia) AS R1, (R.city) AS C1) <-> ((R.Region = Europe) AS R2, (R.city) AS C2)] \
    [(R.week AS W, AVG(R.revenue) AS V), (R.country AS C, AVG(R.profit) AS O), (R.month AS M, V)] \
    USING SUM OVER DIFF(2) AS score";

const CITIES: [(&str, &str, &str); 4] = [
    ("Asia", "Japan", "Tokyo"),
    ("Asia", "India", "Delhi"),
    ("Europe", "France", "Paris"),
    ("Europe", "Germany", "Berlin"),
];
const PRODUCTS: [&str; 3] = ["Inspiron", "Latitude", "XPS"];

/// Small sales table: 4 cities × 3 products × 8 weeks.
pub fn sales() -> Relation {
    let schema = Schema::of(&[
        ("region", ColumnKind::String),
        ("country", ColumnKind::String),
        ("city", ColumnKind::String),
        ("product", ColumnKind::String),
        ("week", ColumnKind::Integer),
        ("month", ColumnKind::Integer),
        ("revenue", ColumnKind::Float),
        ("profit", ColumnKind::Float),
    ]);
    let mut b = RelationBuilder::new("sales", schema);
    for (ci, (region, country, city)) in CITIES.iter().enumerate() {
        for (pi, product) in PRODUCTS.iter().enumerate() {
            for week in 1..=8i64 {
                let revenue = (10 * (ci + 1) + 3 * pi) as f64 + ((week * (pi as i64 + 1)) % 5) as f64;
                let profit = revenue / 4.0 + ci as f64;
                b.push_row(&[
                    Value::str(region),
                    Value::str(country),
                    Value::str(city),
                    Value::str(product),
                    Value::Int(week),
                    Value::Int((week - 1) / 4 + 1),
                    Value::Float(revenue),
                    Value::Float(profit),
                ])
                .unwrap();
            }
        }
    }
    b.finish()
}

pub fn sales_catalog() -> Catalog {
    Catalog::single(sales())
}

/// Fact table `websales(ws_id, wp_fk, day, revenue)` referencing
/// `webpages(wp_pk, webpage, category)`; `webpage` determines `wp_pk`.
pub fn web_catalog(pages: usize, days: usize, seed: u64) -> Catalog {
    let dim_schema = Schema::of(&[
        ("wp_pk", ColumnKind::Integer),
        ("webpage", ColumnKind::String),
        ("category", ColumnKind::String),
    ])
    .with_primary_key(&["wp_pk"])
    .with_fd("webpage", "wp_pk");
    let mut dim = RelationBuilder::new("webpages", dim_schema);
    for p in 0..pages {
        dim.push_row(&[
            Value::Int(100 + p as i64),
            Value::str(&format!("page{p:02}")),
            Value::str(if p % 2 == 0 { "shop" } else { "blog" }),
        ])
        .unwrap();
    }
    let fact_schema = Schema::of(&[
        ("ws_id", ColumnKind::Integer),
        ("wp_fk", ColumnKind::Integer),
        ("day", ColumnKind::Integer),
        ("revenue", ColumnKind::Float),
    ])
    .with_primary_key(&["ws_id"])
    .with_foreign_key("wp_fk", "webpages", "wp_pk");
    let mut fact = RelationBuilder::new("websales", fact_schema);
    let mut x = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
    let mut id = 0i64;
    for p in 0..pages {
        for d in 0..days {
            for _ in 0..2 {
                x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                let v = ((x >> 33) % 1000) as f64 / 10.0;
                fact.push_row(&[
                    Value::Int(id),
                    Value::Int(100 + p as i64),
                    Value::Int(d as i64),
                    Value::Float(v),
                ])
                .unwrap();
                id += 1;
            }
        }
    }
    let mut c = Catalog::new();
    c.insert(dim.finish());
    c.insert(fact.finish());
    c
}

/// Random table `t(a, b, g1, g2, m1, m2)`: `na` values of `a`, string `b`
/// in `x0..x3`, `g1` drawn from `0..ng`, `g2 = g1 / 2`, integer-valued
/// measures. Each (a, g1) appears with probability 0.7, `dup` times.
pub fn random_table(rng: &mut impl rand::Rng, na: usize, ng: usize, dup: usize) -> Relation {
    let schema = Schema::of(&[
        ("a", ColumnKind::Integer),
        ("b", ColumnKind::String),
        ("g1", ColumnKind::Integer),
        ("g2", ColumnKind::Integer),
        ("m1", ColumnKind::Float),
        ("m2", ColumnKind::Float),
    ]);
    let mut b = RelationBuilder::new("t", schema);
    for a in 0..na {
        let tag = format!("x{}", rng.gen_range(0..4));
        for g in 0..ng {
            if !rng.gen_bool(0.7) {
                continue;
            }
            let row = [
                Value::Int(a as i64),
                Value::str(&tag),
                Value::Int(g as i64),
                Value::Int(g as i64 / 2),
                Value::Float(rng.gen_range(-20..=20) as f64),
                Value::Float(rng.gen_range(0..=50) as f64),
            ];
            for _ in 0..dup {
                b.push_row(&row).unwrap();
            }
        }
    }
    b.finish()
}
