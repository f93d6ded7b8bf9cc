#include "lodom/vehicle_model.hpp"

#include <cmath>
#include <stdexcept>

namespace lodom {

void VehicleParams::validate() const {
  const double values[] = {mass, spring_front, spring_rear, shock_front,
                           shock_rear, d_roll, d_pitch, inertia_x, inertia_y,
                           inertia_z, cog_height, dist_front, dist_rear,
                           track_front, track_rear, gravity, v_min};
  for (double v : values) {
    if (!(v > 0.0)) throw std::invalid_argument("vehicle parameter must be > 0");
  }
}

SlipState solve_slip(const MotionInputs& in, const VehicleParams& p) {
  if (!(p.cornering_front > 0.0) || !(p.cornering_rear > 0.0))
    throw std::invalid_argument("cornering stiffness must be > 0");
  if (std::abs(in.v_x) < p.v_min) return {0.0, 0.0};

  const double cf = p.cornering_front, cr = p.cornering_rear;
  const double lf = p.dist_front, lr = p.dist_rear;
  const double r = in.yaw_rate / in.v_x;

  // Unknowns (beta, delta) of
  //   m (a_y + yaw_rate v_x) = F_yf + F_yr
  //   I_z yaw_acc            = lf F_yf - lr F_yr
  // with F_yf = cf (delta - beta - lf yaw_rate / v_x),
  //      F_yr = cr (-beta + lr yaw_rate / v_x).
  Eigen::Matrix2d a;
  a << -(cf + cr), cf,
       -(lf * cf - lr * cr), lf * cf;
  Eigen::Vector2d b;
  b << p.mass * (in.a_y + in.yaw_rate * in.v_x) + (cf * lf - cr * lr) * r,
       p.inertia_z * in.yaw_acc + (cf * lf * lf + cr * lr * lr) * r;

  const Eigen::Vector2d sol = a.partialPivLu().solve(b);
  constexpr double limit = M_PI / 2 - 1e-6;
  return {std::clamp(sol[0], -limit, limit), std::clamp(sol[1], -limit, limit)};
}

PlanarRates bicycle_rates(const Pose6& pose, double speed, const SlipState& slip,
                          const VehicleParams& p) {
  PlanarRates rates;
  rates.x_dot = speed * std::cos(pose.yaw + slip.beta);
  rates.y_dot = speed * std::sin(pose.yaw + slip.beta);
  rates.yaw_dot = speed * std::cos(slip.beta) / p.wheelbase() * std::tan(slip.delta);
  return rates;
}

double pitch_acceleration(double a_x, double pitch, double pitch_rate,
                          const VehicleParams& p) {
  const double d_pitch = (p.shock_front * p.dist_front * p.dist_front +
                          p.shock_rear * p.dist_rear * p.dist_rear) / 2.0;
  const double k_pitch = (p.spring_front * p.dist_front * p.dist_front +
                          p.spring_rear * p.dist_rear * p.dist_rear) / 2.0;
  const double inertia = p.inertia_y + p.mass * p.d_pitch * p.d_pitch;
  return -(-p.mass * p.d_pitch * a_x +
           (k_pitch + p.mass * p.gravity * p.d_pitch) * pitch +
           d_pitch * pitch_rate) / inertia;
}

double roll_acceleration(double a_y, double roll, double roll_rate,
                         const VehicleParams& p) {
  const double d_front = p.shock_front * p.track_front * p.track_front;
  const double d_rear = p.shock_rear * p.track_rear * p.track_rear;
  const double k_front = p.spring_front * p.track_front * p.track_front / 2.0;
  const double k_rear = p.spring_rear * p.track_rear * p.track_rear / 2.0;
  const double inertia = p.inertia_x + p.mass * p.d_roll * p.d_roll;
  return -(-p.mass * p.d_roll * a_y +
           (k_front + k_rear + p.mass * p.gravity * p.d_roll) * roll +
           (d_front + d_rear) * roll_rate) / inertia;
}

double pitch_step(const MotionInputs& in, const VehicleParams& p) {
  const double acc = pitch_acceleration(in.a_x, in.pitch, in.pitch_rate, p);
  return 0.5 * acc * in.dt * in.dt + in.pitch_rate * in.dt + in.pitch;
}

double roll_step(const MotionInputs& in, const VehicleParams& p) {
  const double acc = roll_acceleration(in.a_y, in.roll, in.roll_rate, p);
  return 0.5 * acc * in.dt * in.dt + in.roll_rate * in.dt + in.roll;
}

double z_from_angles(double pitch, double roll, const VehicleParams& p) {
  return p.cog_height + p.d_pitch * (std::cos(pitch) - 1.0) +
         p.d_roll * (std::cos(roll) - 1.0);
}

Vec6 default_process_sigma() {
  Vec6 sigma;
  sigma << 0.0485, 0.0435, 0.121, 0.1456, 0.1456, 0.0044;
  return sigma;
}

Mat6 process_noise_from_sigma(const Vec6& sigma) {
  return sigma.cwiseProduct(sigma).asDiagonal();
}

namespace {

/// Body-frame planar velocity of the step a->b evaluated at heading yaw.
Eigen::Vector2d body_velocity(const Pose6& a, const Pose6& b, double dt, double yaw) {
  const double vx_w = (b.x - a.x) / dt;
  const double vy_w = (b.y - a.y) / dt;
  const double c = std::cos(yaw), s = std::sin(yaw);
  return {c * vx_w + s * vy_w, -s * vx_w + c * vy_w};
}

}  // namespace

MotionPrediction predict_state(const std::vector<TimedPose>& history,
                               const VehicleParams& params, double dt,
                               const Vec6& noise_sigma) {
  MotionPrediction out;
  out.process_noise = process_noise_from_sigma(noise_sigma);

  if (history.size() < 3) {
    out.bootstrap = true;
    for (int i = 0; i < 3; ++i) out.process_noise(i, i) *= 4.0;
    out.inputs.dt = dt;
    if (history.size() == 2) {
      // Constant-velocity rung of the bootstrap ladder: differencing two
      // states gives rates; a constant-pose guess would lag a moving
      // vehicle by a full frame.
      const Pose6 a = history[0].pose;
      const Pose6 b = history[1].pose;
      const double h = history[1].t - history[0].t;
      if (!(h > 0.0))
        throw std::invalid_argument("predict_state: timestamps must increase");
      const double scale = dt / h;
      const Vec3 dpos = (b.translation() - a.translation()) * scale;
      const double droll = angle_diff(b.roll, a.roll) * scale;
      const double dpitch = angle_diff(b.pitch, a.pitch) * scale;
      const double dyaw = angle_diff(b.yaw, a.yaw) * scale;
      out.transition = [dpos, droll, dpitch, dyaw](const Pose6& pose) {
        return Pose6(pose.x + dpos.x(), pose.y + dpos.y(), pose.z + dpos.z(),
                     pose.roll + droll, pose.pitch + dpitch, pose.yaw + dyaw);
      };
    } else {
      out.transition = [](const Pose6& pose) { return pose; };
    }
    out.predicted =
        history.empty() ? Pose6{} : out.transition(history.back().pose);
    return out;
  }

  out.inputs = recover_motion(history, dt);
  return build_prediction(out.inputs, params, dt, noise_sigma, history.back().pose);
}

MotionInputs recover_motion(const std::vector<TimedPose>& history, double dt) {
  if (history.size() < 3)
    throw std::invalid_argument("recover_motion: need at least 3 states");
  const Pose6& p0 = history[history.size() - 3].pose;
  const Pose6& p1 = history[history.size() - 2].pose;
  const Pose6& p2 = history.back().pose;
  const double h1 = history[history.size() - 2].t - history[history.size() - 3].t;
  const double h2 = history.back().t - history[history.size() - 2].t;
  if (!(h1 > 0.0) || !(h2 > 0.0))
    throw std::invalid_argument("recover_motion: timestamps must increase");
  const double h = 0.5 * (h1 + h2);

  MotionInputs in;
  in.dt = dt;

  // Planar velocities over the two intervals, each at the interval's
  // mid heading; acceleration from their central difference.
  const double yaw_a = wrap_pi(p0.yaw + 0.5 * angle_diff(p1.yaw, p0.yaw));
  const double yaw_b = wrap_pi(p1.yaw + 0.5 * angle_diff(p2.yaw, p1.yaw));
  const Eigen::Vector2d v_a = body_velocity(p0, p1, h1, yaw_a);
  const Eigen::Vector2d v_b = body_velocity(p1, p2, h2, yaw_b);

  in.v_x = 0.5 * (v_a.x() + v_b.x());
  const Eigen::Vector2d v_mean = 0.5 * (v_a + v_b);
  in.speed = v_mean.norm();
  in.a_x = (v_b.x() - v_a.x()) / h;
  in.a_y = (v_b.y() - v_a.y()) / h;

  in.yaw_rate = (angle_diff(p2.yaw, p1.yaw) / h2 + angle_diff(p1.yaw, p0.yaw) / h1) / 2.0;
  in.yaw_acc = (angle_diff(p2.yaw, p1.yaw) / h2 - angle_diff(p1.yaw, p0.yaw) / h1) / h;
  in.pitch = p2.pitch;
  in.pitch_rate = angle_diff(p2.pitch, p0.pitch) / (h1 + h2);
  in.roll = p2.roll;
  in.roll_rate = angle_diff(p2.roll, p0.roll) / (h1 + h2);
  return in;
}

MotionPrediction build_prediction(const MotionInputs& in,
                                  const VehicleParams& params, double dt,
                                  const Vec6& noise_sigma,
                                  const Pose6& last_pose) {
  MotionPrediction out;
  out.process_noise = process_noise_from_sigma(noise_sigma);
  const SlipState slip = solve_slip(in, params);
  out.inputs = in;
  out.slip = slip;

  const double speed = in.speed;
  const VehicleParams p = params;
  out.transition = [in, slip, speed, p, dt](const Pose6& pose) {
    const PlanarRates rates = bicycle_rates(pose, speed, slip, p);
    MotionInputs local = in;
    local.pitch = pose.pitch;
    local.roll = pose.roll;
    local.dt = dt;
    const double pitch_next = pitch_step(local, p);
    const double roll_next = roll_step(local, p);
    // Suspension height enters as an increment so the prediction tracks
    // the absolute z of the state rather than pinning it to the resting
    // COG height.
    const double dz = z_from_angles(pitch_next, roll_next, p) -
                      z_from_angles(pose.pitch, pose.roll, p);
    return Pose6(pose.x + rates.x_dot * dt,
                 pose.y + rates.y_dot * dt,
                 pose.z + dz,
                 roll_next,
                 pitch_next,
                 pose.yaw + rates.yaw_dot * dt);
  };
  out.predicted = out.transition(last_pose);
  return out;
}

}  // namespace lodom
