//! Generate a synthetic corpus, summarize it and draw a human subset.

use cyborg::corpus::{generate_fixture, sample_subset, summarize_split, FixtureConfig};

fn main() -> cyborg::Result<()> {
    let (train, test) = generate_fixture(&FixtureConfig::default(), 42)?;
    let summary = summarize_split(&train, &test);
    println!("train {} essays, test {} essays", summary.train.total, summary.test.total);
    print!("{}", summary.grade_table_csv());

    let subset = sample_subset(&train, 0.1, 7)?;
    println!("human subset: {} essays, teacher-labelled rest: {}", subset.u.len(), subset.rest.len());
    Ok(())
}
