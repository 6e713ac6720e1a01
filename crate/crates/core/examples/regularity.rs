// Classify points of a set as regular or irregular, by the inward shell
// series and by the outward series of the inverted set.

use riesz_balayage::geometry::sample_ball_frequency;
use riesz_balayage::wiener::classify_point;
use riesz_balayage::{PointCloud, Setup};

pub fn run() -> riesz_balayage::Result<()> {
    let setup = Setup::newtonian();
    let ball = sample_ball_frequency(&[0.0; 3], 1.0, 4)?;
    let c = classify_point(&setup, &ball, &[0.0; 3], 0.5, 0..=1)?;
    println!("ball center: {:?} (series {:?}, inverted {:?})", c.regularity, c.series.verdict, c.inverted_series.verdict);

    let far = vec![3.0, 0.0, 0.0];
    let with_point = ball.union(&PointCloud::from_point_list(std::slice::from_ref(&far), "point")?, "ball+point")?;
    let c = classify_point(&setup, &with_point, &far, 0.5, 0..=2)?;
    println!("isolated point: {:?}", c.regularity);
    Ok(())
}

#[allow(dead_code)]
fn main() -> riesz_balayage::Result<()> {
    run()
}
