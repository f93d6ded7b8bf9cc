#pragma once

#include <functional>
#include <vector>

#include "lodom/geometry.hpp"

namespace lodom {

/// Chassis, tire and suspension constants (defaults: Volkswagen Passat B6).
/// The cornering stiffnesses have no published value for this platform;
/// 8.0e4 N/rad is a typical mid-size sedan figure and directly scales the
/// recovered slip/wheel angles, so treat it as a tuning knob.
struct VehicleParams {
  double mass = 1750.0;            // kg
  double spring_front = 30800.0;   // N/m
  double spring_rear = 28900.0;    // N/m
  double shock_front = 4500.0;     // N s/m
  double shock_rear = 3500.0;      // N s/m
  double d_roll = 0.1;             // m, COG to roll axis
  double d_pitch = 0.25;           // m, COG to pitch axis
  double inertia_x = 540.0;        // kg m^2
  double inertia_y = 2398.0;       // kg m^2
  double inertia_z = 2875.0;       // kg m^2
  double cog_height = 0.543;       // m
  double dist_front = 1.07;        // m, COG to front axle
  double dist_rear = 1.6;          // m, COG to rear axle
  double track_front = 1.5;        // m
  double track_rear = 1.5;         // m
  double cornering_front = 8.0e4;  // N/rad
  double cornering_rear = 8.0e4;   // N/rad
  double gravity = 9.81;           // m/s^2
  double v_min = 0.5;              // m/s, below this the slip solve degenerates

  double wheelbase() const { return dist_front + dist_rear; }
  void validate() const;  // throws std::invalid_argument on non-positive values
};

/// Motion variables recovered from the estimated state history.
struct MotionInputs {
  double v_x = 0.0;        // longitudinal speed, m/s
  double speed = 0.0;      // planar speed magnitude, m/s
  double a_y = 0.0;        // body-frame lateral acceleration, m/s^2
  double a_x = 0.0;        // body-frame longitudinal acceleration, m/s^2
  double yaw_rate = 0.0;   // rad/s
  double yaw_acc = 0.0;    // rad/s^2
  double pitch = 0.0;      // rad
  double pitch_rate = 0.0; // rad/s
  double roll = 0.0;       // rad
  double roll_rate = 0.0;  // rad/s
  double dt = 0.1;         // s, > 0
};

struct SlipState {
  double beta = 0.0;   // slip angle, rad
  double delta = 0.0;  // front wheel angle, rad
};

struct PlanarRates {
  double x_dot = 0.0;
  double y_dot = 0.0;
  double yaw_dot = 0.0;
};

/// Recover (beta, delta) from the lateral force balance and yaw moment
/// balance, with the tire forces linear in slip. Below params.v_min the
/// 1/v_x terms blow up and the convention is beta = delta = 0.
SlipState solve_slip(const MotionInputs& in, const VehicleParams& params);

/// Kinematic bicycle rates at the given pose. Rear steering is zero.
PlanarRates bicycle_rates(const Pose6& pose, double speed, const SlipState& slip,
                          const VehicleParams& params);

/// Pitch angular acceleration from the spring/damper moment balance.
double pitch_acceleration(double a_x, double pitch, double pitch_rate,
                          const VehicleParams& params);
/// Roll angular acceleration, lateral counterpart of pitch_acceleration.
double roll_acceleration(double a_y, double roll, double roll_rate,
                         const VehicleParams& params);

/// One uniformly-accelerated step of the pitch dynamics.
double pitch_step(const MotionInputs& in, const VehicleParams& params);
/// One uniformly-accelerated step of the roll dynamics.
double roll_step(const MotionInputs& in, const VehicleParams& params);

/// COG height as a function of suspension angles:
/// z = cog_height + d_pitch (cos(pitch) - 1) + d_roll (cos(roll) - 1).
double z_from_angles(double pitch, double roll, const VehicleParams& params);

/// Default per-step model noise standard deviations (m / rad), diagonal only.
Vec6 default_process_sigma();
Mat6 process_noise_from_sigma(const Vec6& sigma);

struct TimedPose {
  double t = 0.0;
  Pose6 pose;
};

/// A one-step state prediction: the nonlinear transition applied to the
/// last estimate, plus the process noise to attach. The transition is a
/// pure function so the UKF can propagate each sigma point through it.
struct MotionPrediction {
  Pose6 predicted;
  Mat6 process_noise;
  std::function<Pose6(const Pose6&)> transition;
  MotionInputs inputs;
  SlipState slip;
  bool bootstrap = false;  // true when history was too short to difference
};

/// Motion variables by central finite differences over the last three
/// states. Requires history.size() >= 3 with increasing timestamps.
MotionInputs recover_motion(const std::vector<TimedPose>& history, double dt);

/// Assemble the one-step prediction from already-recovered motion
/// variables (callers may smooth them first: raw finite differences of
/// centimeter-level estimates are several m/s^2 of acceleration noise).
MotionPrediction build_prediction(const MotionInputs& inputs,
                                  const VehicleParams& params, double dt,
                                  const Vec6& noise_sigma,
                                  const Pose6& last_pose);

/// Build the one-step prediction from the recent estimate history
/// (chronological, most recent last). With fewer than 3 states the motion
/// variables cannot be differenced: one state predicts constant pose, two
/// predict constant velocity, and the planar process noise is inflated x4
/// (the angles keep their calibrated noise; the start frame defines the
/// heading datum, and inflating it floods the fail-aware indicator).
MotionPrediction predict_state(const std::vector<TimedPose>& history,
                               const VehicleParams& params, double dt,
                               const Vec6& noise_sigma = default_process_sigma());

}  // namespace lodom
