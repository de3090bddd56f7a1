//! Free-space mean channel gain and Shannon downlink rate.

use serde::{Deserialize, Serialize};

use super::{distance, EdgeNode, SimError, VehicleState};

/// Links shorter than this are evaluated at this distance (near-field limit).
pub const MIN_CHANNEL_DISTANCE: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChannelParams {
    /// Antenna/system gain `A`, dimensionless.
    pub gain: f64,
    /// Propagation speed in m/s.
    pub light_speed: f64,
    /// Carrier frequency in Hz.
    pub carrier_freq: f64,
    /// Receiver noise power in watts.
    pub noise_power: f64,
    /// Downlink bandwidth in Hz.
    pub downlink_bandwidth: f64,
}

impl Default for ChannelParams {
    fn default() -> Self {
        Self { gain: 1.0, light_speed: 3.0e8, carrier_freq: 2.4e9, noise_power: 1.0e-13, downlink_bandwidth: 2.0e7 }
    }
}

impl ChannelParams {
    pub fn validate(&self) -> Result<(), SimError> {
        let fields = [
            ("gain", self.gain),
            ("light_speed", self.light_speed),
            ("carrier_freq", self.carrier_freq),
            ("noise_power", self.noise_power),
            ("downlink_bandwidth", self.downlink_bandwidth),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v > 0.0) {
                return Err(SimError::InvalidParameter(format!("channel.{name} must be positive and finite, got {v}")));
            }
        }
        Ok(())
    }
}

/// Mean channel gain `A * (c / (4 pi f d))^2`.
pub fn channel_gain(params: &ChannelParams, d: f64) -> Result<f64, SimError> {
    if !(d > 0.0) || !d.is_finite() {
        return Err(SimError::Domain(format!("channel distance must be positive, got {d}")));
    }
    let d = d.max(MIN_CHANNEL_DISTANCE);
    let ratio = params.light_speed / (4.0 * std::f64::consts::PI * params.carrier_freq * d);
    Ok(params.gain * ratio * ratio)
}

/// Downlink rate from `node` to the vehicle, `B * log2(1 + p h / sigma^2)`.
pub fn downlink_rate(node: &EdgeNode, veh: &VehicleState) -> Result<f64, SimError> {
    let d = distance(&node.pos, &veh.pos);
    let h = channel_gain(&node.channel, d)?;
    let snr = veh.transmit_power * h / node.channel.noise_power;
    Ok(node.channel.downlink_bandwidth * (1.0 + snr).log2())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{NodeId, NodeKind, Position};

    fn params(gain: f64) -> ChannelParams {
        ChannelParams { gain, ..ChannelParams::default() }
    }

    fn node_at(pos: Position, bandwidth: f64) -> EdgeNode {
        EdgeNode {
            id: NodeId(0),
            kind: NodeKind::Rsu,
            pos,
            compute: 6e10,
            workload: 0.0,
            workload_max: 6e10,
            inter_node_bandwidth: 1e9,
            channel: ChannelParams { downlink_bandwidth: bandwidth, ..ChannelParams::default() },
        }
    }

    #[test]
    fn gain_examples() {
        // (3e8 / (4 pi 2.4e9 100))^2 computed offline: 9.89465e-9
        let g = channel_gain(&params(1.0), 100.0).unwrap();
        assert!((g - 9.894_646_840_072_05e-9).abs() / g < 1e-9, "{g}");
        let g2 = channel_gain(&params(1.0), 200.0).unwrap();
        assert!((g / g2 - 4.0).abs() < 1e-12);
        assert_eq!(channel_gain(&params(2.0), 100.0).unwrap(), 2.0 * g);
    }

    #[test]
    fn gain_rejects_non_positive_distance() {
        assert!(matches!(channel_gain(&params(1.0), 0.0), Err(SimError::Domain(_))));
        assert!(matches!(channel_gain(&params(1.0), -3.0), Err(SimError::Domain(_))));
        assert!(channel_gain(&params(1.0), f64::NAN).is_err());
    }

    #[test]
    fn gain_clamps_near_field() {
        let p = params(1.0);
        assert_eq!(channel_gain(&p, 0.25).unwrap(), channel_gain(&p, 1.0).unwrap());
    }

    #[test]
    fn rate_examples() {
        let veh = |p: f64| VehicleState {
            pos: Position::ground(100.0, 0.0),
            velocity: [0.0, 0.0],
            transmit_power: p,
            cycles_per_bit: 100.0,
        };
        let node = node_at(Position::ground(0.0, 0.0), 1e7);
        assert_eq!(downlink_rate(&node, &veh(0.0)).unwrap(), 0.0);

        let r = downlink_rate(&node, &veh(0.1)).unwrap();
        // 1e7 * log2(1 + 0.1 * 9.8946e-9 / 1e-13)
        assert!((r - 1.327_257_829_839_914_3e8).abs() / r < 1e-9, "{r}");

        let same = node_at(veh(0.1).pos, 1e7);
        assert!(matches!(downlink_rate(&same, &veh(0.1)), Err(SimError::Domain(_))));
    }

    #[test]
    fn rate_snr_1023_gives_ten_bits_per_hz() {
        let mut node = node_at(Position::ground(0.0, 0.0), 1e7);
        let h = channel_gain(&node.channel, 100.0).unwrap();
        node.channel.noise_power = 1.0;
        let veh = VehicleState {
            pos: Position::ground(100.0, 0.0),
            velocity: [0.0, 0.0],
            transmit_power: 1023.0 / h,
            cycles_per_bit: 1.0,
        };
        let r = downlink_rate(&node, &veh).unwrap();
        assert!((r - 1e8).abs() < 1e-3, "{r}");
    }
}
