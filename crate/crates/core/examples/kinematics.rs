//! Forward and inverse kinematics of one five-bar linkage, plus a coarse
//! ASCII map of its reachable workspace.

use musinger::display::{forward_kinematics, inverse_kinematics, workspace_contains, JointAngles, LinkageGeometry, Point};

fn main() {
    let g = LinkageGeometry::default();
    let p = forward_kinematics(&g, JointAngles::from_degrees(-90.0, -90.0)).unwrap();
    println!("FK(-90, -90) = {p}");
    let a = inverse_kinematics(&g, Point::new(20.0, -55.0)).unwrap();
    println!("IK(20, -55)  = ({:.3}, {:.3}) deg", a.theta1_rad.to_degrees(), a.theta2_rad.to_degrees());
    match inverse_kinematics(&g, Point::new(15.0, -100.0)) {
        Ok(a) => println!("IK(15, -100) = {a:?}"),
        Err(e) => println!("IK(15, -100): {e}"),
    }

    println!("\nworkspace, x -40..70 mm, y 0..-70 mm:");
    for row in 0..=14 {
        let y = -5 * row;
        let line: String = (0..=44)
            .map(|col| {
                let x = -40.0 + col as f64 * 2.5;
                if workspace_contains(&g, Point::new(x, y as f64)) { '#' } else { '.' }
            })
            .collect();
        println!("{y:>5} {line}");
    }
}
