use serde::Serialize;
use thiserror::Error;

use super::kinematics::{
    forward_kinematics, inverse_kinematics, nearest_reachable, JointAngles, KinematicsError,
    LinkageGeometry, Point,
};
use crate::model::{Channel, CHANNELS, FULL_SCALE_N};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DisplayError {
    #[error("linkage {channel}: {source}")]
    Geometry {
        channel: usize,
        source: KinematicsError,
    },
    #[error("linkage {channel} cannot reach {what} at {point}")]
    SkinUnreachable {
        channel: usize,
        what: &'static str,
        point: Point,
    },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DisplayConfig {
    pub linkages: [LinkageGeometry; CHANNELS],
    pub skin_plane_y_mm: f64,
    pub depth_max_mm: f64,
    pub servo_max_speed_rad_s: f64,
    pub tick_rate_hz: u32,
    /// Forces below this render no contact.
    pub activation_threshold_n: f64,
    /// Rest height of each effector above the skin plane.
    pub home_clearance_mm: f64,
}

impl Default for DisplayConfig {
    fn default() -> Self {
        DisplayConfig {
            linkages: [LinkageGeometry::default(); CHANNELS],
            skin_plane_y_mm: -55.0,
            depth_max_mm: 3.0,
            servo_max_speed_rad_s: 8.0,
            tick_rate_hz: 100,
            activation_threshold_n: 0.2,
            home_clearance_mm: 5.0,
        }
    }
}

impl DisplayConfig {
    pub fn validate(&self) -> Result<(), DisplayError> {
        if !(self.depth_max_mm > 0.0) {
            return Err(DisplayError::Invalid("depth_max_mm must be positive".into()));
        }
        if !(self.servo_max_speed_rad_s > 0.0) {
            return Err(DisplayError::Invalid(
                "servo_max_speed_rad_s must be positive".into(),
            ));
        }
        if self.tick_rate_hz == 0 {
            return Err(DisplayError::Invalid("tick_rate_hz must be positive".into()));
        }
        for (i, geom) in self.linkages.iter().enumerate() {
            geom.validate().map_err(|source| DisplayError::Geometry {
                channel: i + 1,
                source,
            })?;
            let x = geom.center_x();
            for (what, y) in [
                ("the skin plane", self.skin_plane_y_mm),
                ("full depth", self.skin_plane_y_mm - self.depth_max_mm),
                ("the home pose", self.skin_plane_y_mm + self.home_clearance_mm),
            ] {
                let point = Point::new(x, y);
                if !super::workspace_contains(geom, point) {
                    return Err(DisplayError::SkinUnreachable {
                        channel: i + 1,
                        what,
                        point,
                    });
                }
            }
        }
        Ok(())
    }

    pub fn tick_period_s(&self) -> f64 {
        1.0 / self.tick_rate_hz as f64
    }

    pub fn tick_period_ms(&self) -> f64 {
        1000.0 / self.tick_rate_hz as f64
    }

    pub fn home_target(&self, channel: Channel) -> Point {
        Point::new(
            self.linkages[channel.index()].center_x(),
            self.skin_plane_y_mm + self.home_clearance_mm,
        )
    }
}

/// Penetration depth rendered for a channel force.
pub fn force_to_depth(force_n: f64, config: &DisplayConfig) -> f64 {
    if !(force_n >= config.activation_threshold_n) {
        return 0.0;
    }
    config.depth_max_mm * force_n.min(FULL_SCALE_N) / FULL_SCALE_N
}

/// Moves `current` toward `target` by at most `max_step`.
pub fn rate_limit(current: f64, target: f64, max_step: f64) -> f64 {
    current + (target - current).clamp(-max_step, max_step)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinkageState {
    pub theta1_rad: f64,
    pub theta2_rad: f64,
    pub effector_mm: Point,
    pub in_contact: bool,
    pub contact_depth_mm: f64,
    /// The commanded target was outside the workspace and was clamped.
    pub clamped: bool,
}

impl LinkageState {
    pub fn angles(&self) -> JointAngles {
        JointAngles::new(self.theta1_rad, self.theta2_rad)
    }
}

#[derive(Debug, Clone, Copy)]
struct Solved {
    target: Point,
    angles: JointAngles,
    clamped: bool,
}

/// Three rate-limited linkages, stepped once per tick.
#[derive(Debug, Clone)]
pub struct LinkageDisplay {
    config: DisplayConfig,
    states: [LinkageState; CHANNELS],
    // last IK solution per channel; targets repeat for as long as a force is held
    solved: [Option<Solved>; CHANNELS],
}

impl LinkageDisplay {
    /// All effectors start at their home pose.
    pub fn new(config: DisplayConfig) -> Result<Self, DisplayError> {
        config.validate()?;
        let mut states = [None; CHANNELS];
        for ch in Channel::ALL {
            let geom = &config.linkages[ch.index()];
            let home = config.home_target(ch);
            let angles = inverse_kinematics(geom, home).map_err(|source| DisplayError::Geometry {
                channel: ch.number() as usize,
                source,
            })?;
            states[ch.index()] = Some(make_state(&config, geom, angles, false).ok_or_else(|| {
                DisplayError::Invalid(format!("linkage {ch} home pose is singular"))
            })?);
        }
        Ok(LinkageDisplay {
            config,
            states: states.map(|s| s.expect("filled above")),
            solved: [None; CHANNELS],
        })
    }

    pub fn config(&self) -> &DisplayConfig {
        &self.config
    }

    pub fn states(&self) -> [LinkageState; CHANNELS] {
        self.states
    }

    pub fn state(&self, channel: Channel) -> LinkageState {
        self.states[channel.index()]
    }

    fn solve(&mut self, channel: Channel, target: Point) -> Solved {
        if let Some(s) = self.solved[channel.index()] {
            if s.target == target {
                return s;
            }
        }
        let geom = &self.config.linkages[channel.index()];
        let solved = match inverse_kinematics(geom, target) {
            Ok(angles) => Solved {
                target,
                angles,
                clamped: false,
            },
            Err(_) => Solved {
                target,
                angles: nearest_reachable(geom, target).1,
                clamped: true,
            },
        };
        self.solved[channel.index()] = Some(solved);
        solved
    }

    /// Steps one linkage toward `target` under the servo speed limit.
    pub fn drive_toward(&mut self, channel: Channel, target: Point, dt_s: f64) -> LinkageState {
        let solved = self.solve(channel, target);
        let max_step = self.config.servo_max_speed_rad_s * dt_s;
        let current = self.states[channel.index()];
        let next = JointAngles::new(
            rate_limit(current.theta1_rad, solved.angles.theta1_rad, max_step),
            rate_limit(current.theta2_rad, solved.angles.theta2_rad, max_step),
        );
        let geom = &self.config.linkages[channel.index()];
        let state = make_state(&self.config, geom, next, solved.clamped).unwrap_or(LinkageState {
            clamped: true,
            ..current
        });
        self.states[channel.index()] = state;
        state
    }

    /// Renders one tick of channel forces (zeros for silence).
    pub fn render_tick(&mut self, forces: &[f64; CHANNELS], dt_s: f64) -> [LinkageState; CHANNELS] {
        for ch in Channel::ALL {
            let depth = force_to_depth(forces[ch.index()], &self.config);
            let target = if depth > 0.0 {
                Point::new(
                    self.config.linkages[ch.index()].center_x(),
                    self.config.skin_plane_y_mm - depth,
                )
            } else {
                self.config.home_target(ch)
            };
            self.drive_toward(ch, target, dt_s);
        }
        self.states
    }

    /// Slide along the skin at constant depth: x sweeps linearly from
    /// `from_x` to `to_x` over `duration_s`, one target per tick.
    pub fn slide(
        &mut self,
        channel: Channel,
        from_x: f64,
        to_x: f64,
        depth_mm: f64,
        duration_s: f64,
    ) -> Vec<LinkageState> {
        let dt = self.config.tick_period_s();
        let ticks = (duration_s / dt).ceil().max(1.0) as usize;
        let y = self.config.skin_plane_y_mm - depth_mm;
        (1..=ticks)
            .map(|k| {
                let x = from_x + (to_x - from_x) * k as f64 / ticks as f64;
                self.drive_toward(channel, Point::new(x, y), dt)
            })
            .collect()
    }

    /// Ticks from the first frame carrying `force_n` until a resting linkage
    /// first touches the skin.
    pub fn contact_latency_ticks(config: &DisplayConfig, force_n: f64) -> Option<u32> {
        let mut display = LinkageDisplay::new(*config).ok()?;
        let forces = [force_n; CHANNELS];
        let dt = config.tick_period_s();
        (0..10 * config.tick_rate_hz).find(|_| display.render_tick(&forces, dt)[0].in_contact)
    }
}

fn make_state(
    config: &DisplayConfig,
    geom: &LinkageGeometry,
    angles: JointAngles,
    clamped: bool,
) -> Option<LinkageState> {
    let p = forward_kinematics(geom, angles).ok()?;
    let in_contact = p.y <= config.skin_plane_y_mm;
    Some(LinkageState {
        theta1_rad: angles.theta1_rad,
        theta2_rad: angles.theta2_rad,
        effector_mm: p,
        in_contact,
        contact_depth_mm: (config.skin_plane_y_mm - p.y).max(0.0),
        clamped,
    })
}
