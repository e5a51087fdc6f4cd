use nalgebra::{Matrix3, Matrix3x6, Matrix6, Vector3, Vector6};

use super::{ControlError, Result};
use crate::Vec3;

const PSD_TOL: f64 = 1e-9;

/// Constant-velocity track: state is position then velocity.
#[derive(Debug, Clone, PartialEq)]
pub struct KinematicTrack {
    pub state: Vector6<f64>,
    pub covariance: Matrix6<f64>,
    pub last_update: f64,
}

impl KinematicTrack {
    pub fn new(position: Vec3, velocity: Vec3, covariance: Matrix6<f64>, time: f64) -> Result<Self> {
        let mut state = Vector6::zeros();
        state.fixed_rows_mut::<3>(0).copy_from(&position);
        state.fixed_rows_mut::<3>(3).copy_from(&velocity);
        let t = Self { state, covariance, last_update: time };
        if !t.is_symmetric_psd() {
            return Err(ControlError::InvalidInput("track covariance must be symmetric PSD".into()));
        }
        Ok(t)
    }

    /// Track with a diagonal covariance built from per-axis standard deviations.
    pub fn isotropic(position: Vec3, velocity: Vec3, position_std: f64, velocity_std: f64, time: f64) -> Result<Self> {
        let p = position_std * position_std;
        let v = velocity_std * velocity_std;
        Self::new(
            position,
            velocity,
            Matrix6::from_diagonal(&Vector6::new(p, p, p, v, v, v)),
            time,
        )
    }

    pub fn position(&self) -> Vec3 {
        self.state.fixed_rows::<3>(0).into_owned()
    }

    pub fn velocity(&self) -> Vec3 {
        self.state.fixed_rows::<3>(3).into_owned()
    }

    pub fn position_covariance(&self) -> Matrix3<f64> {
        self.covariance.fixed_view::<3, 3>(0, 0).into_owned()
    }

    pub fn velocity_covariance(&self) -> Matrix3<f64> {
        self.covariance.fixed_view::<3, 3>(3, 3).into_owned()
    }

    pub fn is_symmetric_psd(&self) -> bool {
        is_symmetric_psd6(&self.covariance)
    }
}

fn is_symmetric_psd6(m: &Matrix6<f64>) -> bool {
    if m.iter().any(|v| !v.is_finite()) {
        return false;
    }
    let scale = m.abs().max().max(1.0);
    if (m - m.transpose()).abs().max() > PSD_TOL * scale {
        return false;
    }
    let eig = m.symmetric_eigenvalues();
    eig.min() >= -PSD_TOL * scale
}

fn symmetrize6(m: &Matrix6<f64>) -> Matrix6<f64> {
    (m + m.transpose()) * 0.5
}

pub fn transition(dt: f64) -> Matrix6<f64> {
    let mut f = Matrix6::identity();
    for i in 0..3 {
        f[(i, i + 3)] = dt;
    }
    f
}

/// Piecewise-white-acceleration process noise.
pub fn process_noise(dt: f64, accel_std: f64) -> Matrix6<f64> {
    let q = accel_std * accel_std;
    let (pp, pv, vv) = (dt.powi(4) / 4.0 * q, dt.powi(3) / 2.0 * q, dt * dt * q);
    let mut m = Matrix6::zeros();
    for i in 0..3 {
        m[(i, i)] = pp;
        m[(i, i + 3)] = pv;
        m[(i + 3, i)] = pv;
        m[(i + 3, i + 3)] = vv;
    }
    m
}

pub fn ekf_predict(track: &KinematicTrack, dt: f64, process_noise_accel_std: f64) -> Result<KinematicTrack> {
    if !(dt > 0.0 && dt.is_finite()) || !(process_noise_accel_std >= 0.0) {
        return Err(ControlError::InvalidInput(format!(
            "need dt > 0 and noise >= 0, got {dt}, {process_noise_accel_std}"
        )));
    }
    let f = transition(dt);
    let p = f * track.covariance * f.transpose() + process_noise(dt, process_noise_accel_std);
    Ok(KinematicTrack {
        state: f * track.state,
        covariance: symmetrize6(&p),
        last_update: track.last_update + dt,
    })
}

fn observation() -> Matrix3x6<f64> {
    let mut h = Matrix3x6::zeros();
    for i in 0..3 {
        h[(i, i)] = 1.0;
    }
    h
}

fn check_pd3(m: &Matrix3<f64>, what: &str) -> Result<nalgebra::Cholesky<f64, nalgebra::U3>> {
    if (m - m.transpose()).abs().max() > PSD_TOL * m.abs().max().max(1.0) {
        return Err(ControlError::InvalidInput(format!("{what} is not symmetric")));
    }
    m.cholesky()
        .ok_or_else(|| ControlError::InvalidInput(format!("{what} is not positive definite")))
}

/// Position-only measurement update in Joseph form.
pub fn ekf_update(track: &KinematicTrack, measurement: Vec3, measurement_cov: &Matrix3<f64>) -> Result<KinematicTrack> {
    check_pd3(measurement_cov, "measurement covariance")?;
    let h = observation();
    let p = &track.covariance;
    let s = h * p * h.transpose() + measurement_cov;
    let s_inv = s
        .cholesky()
        .map(|c| c.inverse())
        .ok_or(ControlError::DegenerateUpdate)?;
    let k = p * h.transpose() * s_inv;
    let innovation: Vector3<f64> = measurement - h * track.state;
    let ikh = Matrix6::identity() - k * h;
    let post = ikh * p * ikh.transpose() + k * measurement_cov * k.transpose();
    let out = KinematicTrack {
        state: track.state + k * innovation,
        covariance: symmetrize6(&post),
        last_update: track.last_update,
    };
    if !out.is_symmetric_psd() {
        return Err(ControlError::DegenerateUpdate);
    }
    Ok(out)
}

/// Inverse-covariance weighted combination of position observations.
pub fn fuse_shared_measurements(observations: &[(Vec3, Matrix3<f64>)]) -> Result<(Vec3, Matrix3<f64>)> {
    match observations {
        [] => Err(ControlError::InvalidInput("nothing to fuse".into())),
        [single] => {
            check_pd3(&single.1, "observation covariance")?;
            Ok(*single)
        }
        _ => {
            let mut info = Matrix3::zeros();
            let mut weighted = Vec3::zeros();
            for (z, r) in observations {
                let r_inv = check_pd3(r, "observation covariance")?.inverse();
                info += r_inv;
                weighted += r_inv * z;
            }
            let cov = info
                .cholesky()
                .map(|c| c.inverse())
                .ok_or_else(|| ControlError::InvalidInput("fused information is singular".into()))?;
            let cov = (cov + cov.transpose()) * 0.5;
            Ok((cov * weighted, cov))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn track(p: Vec3, v: Vec3) -> KinematicTrack {
        KinematicTrack::isotropic(p, v, 2.0, 1.0, 0.0).unwrap()
    }

    #[test]
    fn still_target_noiseless_predict_is_identity() {
        let t = track(Vec3::new(1.0, 2.0, 3.0), Vec3::zeros());
        let p = ekf_predict(&t, 0.7, 0.0).unwrap();
        assert_eq!(p.position(), t.position());
        // velocity variance leaks into position, but nothing else changes
        let t0 = KinematicTrack::isotropic(Vec3::new(1.0, 2.0, 3.0), Vec3::zeros(), 2.0, 0.0, 0.0).unwrap();
        let p0 = ekf_predict(&t0, 0.7, 0.0).unwrap();
        assert!((p0.covariance - t0.covariance).abs().max() < 1e-15);
        assert!((p0.last_update - 0.7).abs() < 1e-15);
    }

    #[test]
    fn uncertainty_grows_with_dt() {
        let t = track(Vec3::zeros(), Vec3::new(3.0, 0.0, 0.0));
        let a = ekf_predict(&t, 1.0, 0.5).unwrap().position_covariance().trace();
        let b = ekf_predict(&t, 2.0, 0.5).unwrap().position_covariance().trace();
        assert!(b > a && a > t.position_covariance().trace());
        assert!(ekf_predict(&t, 0.0, 0.5).is_err());
    }

    #[test]
    fn one_axis_closed_form() {
        // single-axis blocks: P = [[p, c], [c, v]]
        let (p, c, v, dt, s) = (4.0, 0.5, 1.5, 0.3, 0.8);
        let mut cov = Matrix6::zeros();
        for i in 0..3 {
            cov[(i, i)] = p;
            cov[(i, i + 3)] = c;
            cov[(i + 3, i)] = c;
            cov[(i + 3, i + 3)] = v;
        }
        let t = KinematicTrack::new(Vec3::new(1.0, 0.0, 0.0), Vec3::new(2.0, -1.0, 0.5), cov, 0.0).unwrap();
        let out = ekf_predict(&t, dt, s).unwrap();
        let q = s * s;
        let pp = p + 2.0 * dt * c + dt * dt * v + dt.powi(4) / 4.0 * q;
        let pv = c + dt * v + dt.powi(3) / 2.0 * q;
        let vv = v + dt * dt * q;
        for i in 0..3 {
            assert!((out.covariance[(i, i)] - pp).abs() < 1e-12);
            assert!((out.covariance[(i, i + 3)] - pv).abs() < 1e-12);
            assert!((out.covariance[(i + 3, i + 3)] - vv).abs() < 1e-12);
        }
        assert!((out.position() - Vec3::new(1.6, -0.3, 0.15)).norm() < 1e-12);
    }

    #[test]
    fn zero_innovation_keeps_mean_and_shrinks_covariance() {
        let t = track(Vec3::new(5.0, 5.0, 5.0), Vec3::new(1.0, 0.0, 0.0));
        let u = ekf_update(&t, t.position(), &(Matrix3::identity() * 0.25)).unwrap();
        assert!((u.position() - t.position()).norm() < 1e-12);
        assert!(u.covariance.trace() < t.covariance.trace());
    }

    #[test]
    fn converges_on_noiseless_truth() {
        let v = Vec3::new(4.0, -2.0, 1.0);
        let mut t = KinematicTrack::isotropic(Vec3::new(10.0, 10.0, 10.0), Vec3::zeros(), 20.0, 10.0, 0.0).unwrap();
        let r = Matrix3::identity() * 1e-4;
        let mut err = f64::INFINITY;
        for k in 1..=20 {
            t = ekf_predict(&t, 0.1, 0.01).unwrap();
            let truth = v * (0.1 * k as f64);
            t = ekf_update(&t, truth, &r).unwrap();
            err = (t.position() - truth).norm();
        }
        assert!(err < 0.05, "{err}");
    }

    #[test]
    fn rejects_bad_measurement_covariance() {
        let t = track(Vec3::zeros(), Vec3::zeros());
        let bad = Matrix3::from_diagonal(&Vector3::new(1.0, 0.0, 1.0));
        assert!(ekf_update(&t, Vec3::zeros(), &bad).is_err());
    }

    #[test]
    fn fusion_identities() {
        let r = Matrix3::identity() * 2.0;
        let single = fuse_shared_measurements(&[(Vec3::new(1.0, 2.0, 3.0), r)]).unwrap();
        assert_eq!(single, (Vec3::new(1.0, 2.0, 3.0), r));
        let (x, p) = fuse_shared_measurements(&[(Vec3::zeros(), r), (Vec3::new(2.0, 4.0, 6.0), r)]).unwrap();
        assert!((x - Vec3::new(1.0, 2.0, 3.0)).norm() < 1e-12);
        assert!((p - Matrix3::identity()).abs().max() < 1e-12);
        assert!(fuse_shared_measurements(&[]).is_err());
        assert!(fuse_shared_measurements(&[(Vec3::zeros(), Matrix3::zeros())]).is_err());
    }

    #[test]
    fn random_updates_stay_psd() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let a = Matrix6::from_fn(|_, _| rng.random_range(-1.0..1.0));
            let cov = a * a.transpose() + Matrix6::identity() * 1e-3;
            let t = KinematicTrack::new(Vec3::zeros(), Vec3::zeros(), cov, 0.0).unwrap();
            let b = Matrix3::from_fn(|_, _| rng.random_range(-1.0..1.0));
            let r = b * b.transpose() + Matrix3::identity() * 0.1;
            let z = Vec3::from_fn(|_, _| rng.random_range(-5.0..5.0));
            let u = ekf_update(&t, z, &r).unwrap();
            assert!(u.is_symmetric_psd());
            assert!(u.covariance.trace() <= t.covariance.trace() + 1e-12);
        }
    }
}
