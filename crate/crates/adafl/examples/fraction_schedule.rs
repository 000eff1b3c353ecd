//! The dynamic client-fraction schedule: block structure, per-round
//! lookup, and what the schedule costs in relative communication units
//! compared with constant fractions.
//!
//! Run with: cargo run --release --example fraction_schedule

use adafl::{cohort_size, communication_cost, FractionSchedule, Result};

fn main() -> Result<()> {
    let clients = 100;
    let rounds = 1000;
    let schedule = FractionSchedule::new(0.1, 0.5, 5, rounds)?;
    println!(
        "schedule: {} blocks of {} rounds, fraction step {:.2}\n",
        schedule.num_fractions(),
        schedule.rounds_per_block(),
        schedule.gamma_step()
    );
    println!("block  rounds      fraction  clients/round");
    for (b, (first, last, gamma)) in schedule.blocks().into_iter().enumerate() {
        println!(
            "{:>5}  {first:>4}-{last:<4}  {gamma:>8.2}  {:>13}",
            b + 1,
            cohort_size(gamma, clients)
        );
    }

    println!("\nper-round lookups: t=1 -> {:.2}, t=200 -> {:.2}, t=201 -> {:.2}, t=1000 -> {:.2}",
        schedule.fraction_at(1)?,
        schedule.fraction_at(200)?,
        schedule.fraction_at(201)?,
        schedule.fraction_at(1000)?,
    );

    // cumulative cost comparison against the two constant baselines
    let small = FractionSchedule::new(0.1, 0.1, 1, rounds)?;
    let large = FractionSchedule::new(0.5, 0.5, 1, rounds)?;
    println!("\ncost to round t (relative units):");
    println!("    t   dynamic  const 0.1  const 0.5");
    for t in [100, 423, 600, 1000] {
        println!(
            "{t:>5}  {:>8}  {:>9}  {:>9}",
            communication_cost(&schedule, t, clients)?,
            communication_cost(&small, t, clients)?,
            communication_cost(&large, t, clients)?,
        );
    }
    Ok(())
}
