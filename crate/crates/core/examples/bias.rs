//! Compare teacher labels against gold labels per demographic subgroup.

use cyborg::bias::audit_one;
use cyborg::corpus::{generate_fixture, sample_subset, FixtureConfig};
use cyborg::pipeline::{build_augmented, Origin};
use cyborg::teacher::SimTeacherParams;

fn main() -> cyborg::Result<()> {
    let (train, _) = generate_fixture(&FixtureConfig::default(), 2)?;
    let subset = sample_subset(&train, 0.2, 4)?;
    let teacher = SimTeacherParams::new(0.6, -0.3, 8)?;
    let origin = Origin {
        p: 0.2,
        seed: 4,
        teacher: teacher.descriptor(),
    };
    let augmented = build_augmented(&train, &subset.u, &teacher, origin)?;
    let (report, overall) = audit_one(&train, &augmented.data)?;
    println!("overall teacher SMD {:.3}", overall.unwrap_or(f64::NAN));
    print!("{}", report.to_csv());
    Ok(())
}
