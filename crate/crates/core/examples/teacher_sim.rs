//! Render a teacher prompt, parse a completion and calibrate a simulated
//! teacher to a target quality.

use cyborg::corpus::{generate_fixture, FixtureConfig};
use cyborg::teacher::{fit_sim_params, parse_score, render_prompt};

fn main() -> cyborg::Result<()> {
    let rubric = "Score 6: clear and consistent mastery.\nScore 1: very little or no mastery.";
    let prompt = render_prompt("Phones help students learn.", rubric, 1, 6)?;
    println!("{prompt}");
    let score = parse_score("- Score: 4\nThe argument is adequate.", 1, 6).unwrap();
    println!("parsed score {}", score.get());

    let (train, _) = generate_fixture(&FixtureConfig::default(), 3)?;
    let fit = fit_sim_params(0.85, -0.2, &train, 9)?;
    println!(
        "{} reaches qwk {:.3}, smd {:.3}",
        fit.params.descriptor(),
        fit.quality.qwk,
        fit.quality.smd
    );
    Ok(())
}
