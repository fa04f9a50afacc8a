//! Life-table expectation against brute-force enumeration and simulation.

use lifespan_core::actuarial::{average_tables, expected_remaining_lifespan, LifeTable, MAX_AGE};
use lifespan_core::SplitMix64;

/// Gompertz–Makeham hazard with elevated infant mortality, roughly the shape
/// of a modern period table.
fn gompertz_table() -> LifeTable {
    let qx = (0..=MAX_AGE)
        .map(|x| {
            let infant = if x == 0 { 0.006 } else { 0.0 };
            let hazard = 0.0004 + 0.00002 * 1.1f64.powi(x as i32);
            (1.0 - (-hazard).exp() + infant).min(1.0)
        })
        .collect();
    LifeTable::new(qx, "gompertz-makeham").unwrap()
}

/// Yearly Bernoulli deaths from `floor(age)`, dying mid-year.
fn simulate(table: &LifeTable, age: f64, trials: usize, seed: u64) -> f64 {
    let mut rng = SplitMix64::new(seed);
    let start = age.floor() as usize;
    let mut total = 0.0;
    for _ in 0..trials {
        let mut years = 0usize;
        let mut a = start;
        loop {
            let q = if a >= MAX_AGE { 1.0 } else { table.qx()[a] };
            if rng.next_f64() < q {
                break;
            }
            years += 1;
            a += 1;
        }
        total += years as f64 + 0.5;
    }
    total / trials as f64
}

/// Exact expectation by enumerating the death-year distribution.
fn enumerate(table: &LifeTable, age: f64) -> f64 {
    let start = age.floor() as usize;
    let mut alive = 1.0;
    let mut expectation = 0.0;
    for (k, a) in (start..=MAX_AGE).enumerate() {
        let q = table.qx()[a];
        expectation += alive * q * (k as f64 + 0.5);
        alive *= 1.0 - q;
    }
    expectation
}

#[test]
fn toy_table_enumeration() {
    let toy = LifeTable::new(vec![0.5, 0.5, 1.0], "toy").unwrap();
    // Death in year 0, 1, 2 with probabilities 0.5, 0.25, 0.25.
    let brute = 0.5 * 0.5 + 0.25 * 1.5 + 0.25 * 2.5;
    assert_eq!(brute, 1.25);
    assert_eq!(enumerate(&toy, 0.0), 1.25);
    assert_eq!(expected_remaining_lifespan(&toy, 0.0).unwrap(), 1.25);
}

#[test]
fn matches_enumeration_on_fixture() {
    let table = gompertz_table();
    for age in [0.0, 1.5, 30.0, 64.9, 90.0, 109.0] {
        let a = expected_remaining_lifespan(&table, age).unwrap();
        let b = enumerate(&table, age);
        assert!((a - b).abs() < 1e-9, "age {age}: {a} vs {b}");
    }
}

#[test]
fn matches_monte_carlo_on_fixture() {
    let table = gompertz_table();
    for (i, age) in [40.0, 75.0, 100.0].into_iter().enumerate() {
        let exact = expected_remaining_lifespan(&table, age).unwrap();
        let mc = simulate(&table, age, 1_000_000, 17 + i as u64);
        assert!((exact - mc).abs() < 0.02, "age {age}: {exact} vs {mc}");
    }
}

#[test]
fn decreasing_in_age_and_bounded_by_horizon() {
    let table = gompertz_table();
    let mut prev = f64::INFINITY;
    for x in 0..=MAX_AGE {
        let e = expected_remaining_lifespan(&table, x as f64).unwrap();
        assert!(e <= (111 - x) as f64, "age {x}");
        if table.qx()[x] < 1.0 && x > 0 {
            assert!(e < prev, "age {x}: {e} !< {prev}");
        }
        prev = e;
    }
}

#[test]
fn values_past_cutoff_do_not_matter() {
    let base: Vec<f64> = gompertz_table().qx().to_vec();
    let mut extended = base.clone();
    extended[MAX_AGE] = 0.2;
    extended.extend([0.1, 0.0, 0.3]);
    let a = LifeTable::new(base, "a").unwrap();
    let b = LifeTable::new(extended, "b").unwrap();
    for age in [0.0, 50.0, 109.5, 110.0, 115.0] {
        assert_eq!(
            expected_remaining_lifespan(&a, age).unwrap(),
            expected_remaining_lifespan(&b, age).unwrap()
        );
    }
}

#[test]
fn eleven_year_average_weights_equally() {
    let tables: Vec<LifeTable> = (0..11)
        .map(|k| LifeTable::new(vec![0.01 * (k + 1) as f64; 111], format!("{}", 2000 + k)).unwrap())
        .collect();
    let avg = average_tables(&tables, "2000-2010").unwrap();
    assert!((avg.qx()[40] - 0.06).abs() < 1e-12);
}
