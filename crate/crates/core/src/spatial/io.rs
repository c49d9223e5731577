use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{Discretization, Weights};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IoMode {
    Bumps,
    Identity,
}

/// Gaussian bump `amplitude * exp(-|x - center|^2 / (2 width^2))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BumpChannel {
    pub center: Vec<f64>,
    pub width: f64,
    pub amplitude: f64,
}

/// Window average over the box of side `width` around `center`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorChannel {
    pub center: Vec<f64>,
    pub width: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IoLayout {
    pub mode: IoMode,
    #[serde(default)]
    pub disturbance_channels: Vec<BumpChannel>,
    #[serde(default)]
    pub actuator_channels: Vec<BumpChannel>,
    #[serde(default)]
    pub sensor_channels: Vec<SensorChannel>,
}

impl IoLayout {
    pub fn identity() -> Self {
        Self {
            mode: IoMode::Identity,
            disturbance_channels: Vec::new(),
            actuator_channels: Vec::new(),
            sensor_channels: Vec::new(),
        }
    }
}

/// `b1: n x m1`, `b2: n x m2`, `c: p x n`, with the inner-product weights of the
/// disturbance, control, and output spaces.
#[derive(Debug, Clone)]
pub struct IoOperators {
    pub b1: DMatrix<f64>,
    pub b2: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub disturbance_weights: Weights,
    pub control_weights: Weights,
    pub output_weights: Weights,
}

fn bump_matrix(
    disc: &Discretization,
    channels: &[BumpChannel],
    kind: &'static str,
) -> Result<DMatrix<f64>> {
    let n = disc.node_count();
    let mut m = DMatrix::zeros(n, channels.len());
    for (j, ch) in channels.iter().enumerate() {
        if !disc.contains(&ch.center) || !(ch.width > 0.0) || !ch.amplitude.is_finite() {
            return Err(Error::ChannelOutOfDomain { kind, index: j });
        }
        let col = disc.sample(|x| {
            let r2: f64 = x
                .iter()
                .zip(&ch.center)
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            ch.amplitude * (-r2 / (2.0 * ch.width * ch.width)).exp()
        });
        m.set_column(j, &col);
    }
    Ok(m)
}

pub fn build_io_operators(disc: &Discretization, layout: &IoLayout) -> Result<IoOperators> {
    let n = disc.node_count();
    match layout.mode {
        IoMode::Identity => {
            let eye = DMatrix::identity(n, n);
            Ok(IoOperators {
                b1: eye.clone(),
                b2: eye.clone(),
                c: eye,
                disturbance_weights: disc.weights.clone(),
                control_weights: disc.weights.clone(),
                output_weights: disc.weights.clone(),
            })
        }
        IoMode::Bumps => {
            let b1 = bump_matrix(disc, &layout.disturbance_channels, "disturbance")?;
            let b2 = bump_matrix(disc, &layout.actuator_channels, "actuator")?;
            let w = disc.weights.as_vector();
            let mut c = DMatrix::zeros(layout.sensor_channels.len(), n);
            for (i, ch) in layout.sensor_channels.iter().enumerate() {
                if !disc.contains(&ch.center) || !(ch.width > 0.0) || !ch.weight.is_finite() {
                    return Err(Error::ChannelOutOfDomain {
                        kind: "sensor",
                        index: i,
                    });
                }
                let half = ch.width / 2.0 + 1e-12;
                let d = disc.spec.dimension;
                for (k, x) in disc.node_coords.iter().enumerate() {
                    if x[..d].iter().zip(&ch.center).all(|(a, b)| (a - b).abs() <= half) {
                        c[(i, k)] = ch.weight * w[k];
                    }
                }
            }
            Ok(IoOperators {
                disturbance_weights: Weights::unit(b1.ncols()),
                control_weights: Weights::unit(b2.ncols()),
                output_weights: Weights::unit(c.nrows()),
                b1,
                b2,
                c,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spatial::{adjoint, build_grid, GridSpec};
    use nalgebra::DVector;

    fn bump(center: f64, width: f64) -> BumpChannel {
        BumpChannel {
            center: vec![center],
            width,
            amplitude: 1.0,
        }
    }

    #[test]
    fn identity_mode_is_identity() {
        let d = build_grid(GridSpec::new(1, 1.0, 5).unwrap()).unwrap();
        let io = build_io_operators(&d, &IoLayout::identity()).unwrap();
        let eye = DMatrix::<f64>::identity(5, 5);
        assert_eq!(io.b1, eye);
        assert_eq!(io.b2, eye);
        assert_eq!(io.c, eye);
    }

    #[test]
    fn bump_peaks_at_center_node() {
        let d = build_grid(GridSpec::new(1, 1.0, 101).unwrap()).unwrap();
        let layout = IoLayout {
            mode: IoMode::Bumps,
            disturbance_channels: vec![],
            actuator_channels: vec![bump(0.5, 0.1)],
            sensor_channels: vec![],
        };
        let io = build_io_operators(&d, &layout).unwrap();
        let col = io.b2.column(0);
        assert_eq!(col.imax(), 50);
        assert!((col[50] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn full_window_sensor_equals_weights() {
        let d = build_grid(GridSpec::new(1, 1.0, 11).unwrap()).unwrap();
        let layout = IoLayout {
            mode: IoMode::Bumps,
            disturbance_channels: vec![],
            actuator_channels: vec![],
            sensor_channels: vec![SensorChannel {
                center: vec![0.5],
                width: 1.0,
                weight: 1.0,
            }],
        };
        let io = build_io_operators(&d, &layout).unwrap();
        let row: Vec<f64> = io.c.row(0).iter().copied().collect();
        assert_eq!(row, d.weights.as_vector().as_slice());
    }

    #[test]
    fn rejects_channels_outside_domain() {
        let d = build_grid(GridSpec::new(1, 1.0, 11).unwrap()).unwrap();
        let mut layout = IoLayout {
            mode: IoMode::Bumps,
            disturbance_channels: vec![bump(1.5, 0.1)],
            actuator_channels: vec![],
            sensor_channels: vec![],
        };
        assert!(matches!(
            build_io_operators(&d, &layout),
            Err(Error::ChannelOutOfDomain { kind: "disturbance", .. })
        ));
        layout.disturbance_channels = vec![bump(0.5, 0.0)];
        assert!(build_io_operators(&d, &layout).is_err());
        layout.disturbance_channels = vec![BumpChannel {
            center: vec![0.5, 0.5],
            width: 0.1,
            amplitude: 1.0,
        }];
        assert!(build_io_operators(&d, &layout).is_err());
    }

    #[test]
    fn adjoints_are_consistent_with_weights() {
        let d = build_grid(GridSpec::new(2, 1.0, 6).unwrap()).unwrap();
        let layout = IoLayout {
            mode: IoMode::Bumps,
            disturbance_channels: vec![BumpChannel {
                center: vec![0.2, 0.7],
                width: 0.15,
                amplitude: 2.0,
            }],
            actuator_channels: vec![
                BumpChannel {
                    center: vec![0.5, 0.5],
                    width: 0.2,
                    amplitude: 1.0,
                },
                BumpChannel {
                    center: vec![0.9, 0.1],
                    width: 0.1,
                    amplitude: 0.5,
                },
            ],
            sensor_channels: vec![SensorChannel {
                center: vec![0.4, 0.4],
                width: 0.5,
                weight: 1.0,
            }],
        };
        let io = build_io_operators(&d, &layout).unwrap();
        let n = d.node_count();
        let s = DVector::from_fn(n, |i, _| ((i * 7 % 11) as f64 - 5.0) / 3.0);
        let u = DVector::from_vec(vec![0.3, -1.2]);
        let b2_adj = adjoint(&io.b2, &io.control_weights, &d.weights);
        let lhs = d.weights.inner(&(&io.b2 * &u), &s).unwrap();
        let rhs = io.control_weights.inner(&u, &(&b2_adj * &s)).unwrap();
        assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0));
        let y = DVector::from_vec(vec![0.7]);
        let c_adj = adjoint(&io.c, &d.weights, &io.output_weights);
        let lhs = io.output_weights.inner(&(&io.c * &s), &y).unwrap();
        let rhs = d.weights.inner(&s, &(&c_adj * &y)).unwrap();
        assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0));
    }
}
