//! Sliding-window collision datapoints from recorded episodes.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::render::DepthFrame;
use crate::sim::episode::{random_action, CollisionEpisode, EpisodeConfig};

/// Model input paired with the partial state, `T` actions relative to the
/// window's start yaw, and `T` per-step collision labels.
#[derive(Clone, Debug, PartialEq)]
pub struct CollisionDatapoint<X> {
    pub input: X,
    pub state: [f32; 6],
    pub actions: Vec<[f32; 4]>,
    pub labels: Vec<u8>,
}

/// `d`: raw depth frame input.
pub type FrameDatapoint = CollisionDatapoint<DepthFrame>;
/// `d'`: latent mean input.
pub type LatentDatapoint = CollisionDatapoint<Vec<f32>>;

impl<X> CollisionDatapoint<X> {
    pub fn horizon(&self) -> usize {
        self.labels.len()
    }

    /// Labels never drop back to 0 once set.
    pub fn labels_monotone(&self) -> bool {
        self.labels.windows(2).all(|w| w[0] <= w[1])
    }

    pub fn with_input<Y>(&self, input: Y) -> CollisionDatapoint<Y> {
        CollisionDatapoint {
            input,
            state: self.state,
            actions: self.actions.clone(),
            labels: self.labels.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LabelConfig {
    /// Prediction horizon `T`.
    pub horizon: usize,
    /// Offset between consecutive window starts.
    pub stride: usize,
}

impl Default for LabelConfig {
    fn default() -> Self {
        Self { horizon: 10, stride: 1 }
    }
}

/// Cuts an episode into windows of `T` actions. For a timeout episode only
/// windows that fit entirely inside the recording are produced. For a
/// collision episode every start up to the colliding step is used, and
/// windows running past the collision are padded with random actions drawn
/// from `ep_cfg` while their labels stay 1.
pub fn label_episode<R: Rng + ?Sized>(
    episode: &CollisionEpisode,
    cfg: &LabelConfig,
    ep_cfg: &EpisodeConfig,
    rng: &mut R,
) -> Result<Vec<FrameDatapoint>> {
    let n = episode.steps.len();
    if n == 0 {
        return Err(invalid("episode has no steps"));
    }
    if cfg.horizon == 0 || cfg.stride == 0 {
        return Err(invalid("horizon and stride must be >= 1"));
    }
    let t_len = cfg.horizon;
    let last_start = match episode.collided_at {
        Some(c) => c.min(n - 1) as isize,
        None => n as isize - t_len as isize,
    };
    let mut out = Vec::new();
    let mut t = 0usize;
    while (t as isize) <= last_start {
        let anchor = episode.steps[t].yaw;
        let mut actions = Vec::with_capacity(t_len);
        let mut labels = Vec::with_capacity(t_len);
        for i in 0..t_len {
            let k = t + i;
            let a = if k < n {
                episode.steps[k].action_from(anchor)
            } else {
                random_action(ep_cfg, rng)
            };
            actions.push(a.to_f32());
            labels.push(u8::from(episode.collided_at.is_some_and(|c| k >= c)));
        }
        let step = &episode.steps[t];
        out.push(CollisionDatapoint {
            input: step.frame.clone(),
            state: step.state.to_f32(),
            actions,
            labels,
        });
        t += cfg.stride;
    }
    Ok(out)
}

/// Left-right mirror of a datapoint: image flipped; `v_y`, yaw rate, roll and
/// every steering angle and lateral reference velocity negated.
pub fn flip_augment(d: &FrameDatapoint) -> FrameDatapoint {
    let mut state = d.state;
    state[1] = -state[1];
    state[3] = -state[3];
    state[4] = -state[4];
    CollisionDatapoint {
        input: d.input.flipped(),
        state,
        actions: d.actions.iter().map(|a| [a[0], -a[1], a[2], -a[3]]).collect(),
        labels: d.labels.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::dynamics::PartialState;
    use crate::sim::episode::EpisodeStep;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn episode(n: usize, collided_at: Option<usize>) -> CollisionEpisode {
        let steps = (0..n)
            .map(|k| EpisodeStep {
                frame: DepthFrame::invalid(2, 3),
                state: PartialState([k as f64, 0.1, 0.0, 0.2, 0.3, 0.0]),
                yaw: 0.1 * k as f64,
                heading: 0.0,
                v_r: [1.0, 0.0, 0.0],
            })
            .collect();
        CollisionEpisode { steps, collided_at }
    }

    fn label(ep: &CollisionEpisode, t: usize) -> Vec<FrameDatapoint> {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        label_episode(ep, &LabelConfig { horizon: t, stride: 1 }, &EpisodeConfig::default(), &mut rng).unwrap()
    }

    #[test]
    fn timeout_windows_are_clear() {
        let d = label(&episode(12, None), 8);
        assert_eq!(d.len(), 5);
        assert!(d.iter().all(|p| p.labels.iter().all(|l| *l == 0)));
    }

    #[test]
    fn collision_labels_follow_rule() {
        // Collision during step 4: the window starting at 0 sees it at its fifth label.
        let d = label(&episode(5, Some(4)), 8);
        assert_eq!(d.len(), 5);
        assert_eq!(d[0].labels, vec![0, 0, 0, 0, 1, 1, 1, 1]);
        assert_eq!(d[4].labels, vec![1; 8]);
        assert!(d.iter().all(|p| p.labels_monotone() && p.actions.len() == 8));
    }

    #[test]
    fn actions_reanchored_to_window_start() {
        let d = label(&episode(12, None), 4);
        // heading 0, start yaw 0.1 * t.
        assert!((d[3].actions[0][3] + 0.3).abs() < 1e-6);
    }

    #[test]
    fn empty_episode_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let ep = CollisionEpisode { steps: vec![], collided_at: None };
        assert!(label_episode(&ep, &LabelConfig::default(), &EpisodeConfig::default(), &mut rng).is_err());
    }

    #[test]
    fn flip_is_involution() {
        let d = label(&episode(5, Some(2)), 4).remove(1);
        assert_eq!(flip_augment(&flip_augment(&d)), d);
        let f = flip_augment(&d);
        assert_eq!(f.state[1], -d.state[1]);
        assert_eq!(f.labels, d.labels);
    }
}
