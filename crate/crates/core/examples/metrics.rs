//! Agreement metrics between two raters.

use cyborg::corpus::ScoreLabel;
use cyborg::metrics::{report, score_confusion};

fn labels(v: &[i64]) -> Vec<ScoreLabel> {
    v.iter().map(|&x| ScoreLabel::new(x).unwrap()).collect()
}

fn main() -> cyborg::Result<()> {
    let gold = labels(&[1, 2, 3, 3, 4, 4, 5, 6, 2, 3]);
    let pred = labels(&[1, 2, 3, 4, 4, 3, 5, 5, 2, 2]);
    let m = score_confusion(&gold, &pred)?;
    println!("exact agreement {}/{}", m.trace(), m.total());
    let r = report(&gold, &pred)?;
    println!("{}", serde_json::to_string_pretty(&r)?);
    Ok(())
}
