#include "filterlab/diffusion.hpp"

#include "filterlab/errors.hpp"

#include <cmath>
#include <vector>

namespace filterlab {

bool DomainBox::contains(const Vector& x, double inflate) const {
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double mid = 0.5 * (lower(i) + upper(i));
    const double half = 0.5 * (upper(i) - lower(i)) * inflate;
    if (!(x(i) >= mid - half && x(i) <= mid + half)) return false;
  }
  return true;
}

Vector eval_drift(const DiffusionModel& model, const Vector& x, const Vector& control) {
  Vector out(model.dim_state);
  model.drift({x.data(), static_cast<std::size_t>(x.size())},
              {control.data(), static_cast<std::size_t>(control.size())},
              {out.data(), model.dim_state});
  return out;
}

Matrix eval_diffusion_factor(const DiffusionModel& model, const Vector& x) {
  using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  RowMajor out(model.dim_state, model.dim_noise);
  model.diffusion_factor({x.data(), static_cast<std::size_t>(x.size())},
                         {out.data(), static_cast<std::size_t>(out.size())});
  return out;
}

Vector eval_observation(const DiffusionModel& model, const Vector& x, const Vector& y) {
  Vector out(model.dim_obs);
  model.observation({x.data(), static_cast<std::size_t>(x.size())},
                    {y.data(), static_cast<std::size_t>(y.size())},
                    {out.data(), model.dim_obs});
  return out;
}

Matrix sigma_at(const DiffusionModel& model, const Vector& x) {
  const Matrix b = eval_diffusion_factor(model, x);
  return b * b.transpose();
}

Vector field_gradient(const SmoothField& f, const Vector& x, double step) {
  if (f.gradient) return f.gradient(x);
  Vector grad(x.size());
  Vector probe = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    probe(i) = x(i) + step;
    const double up = f.value(probe);
    probe(i) = x(i) - step;
    const double down = f.value(probe);
    probe(i) = x(i);
    grad(i) = (up - down) / (2.0 * step);
  }
  return grad;
}

double gamma(const DiffusionModel& model, const SmoothField& f, const SmoothField& g,
             const Vector& x) {
  const double step = model.derivatives.step;
  const Vector df = field_gradient(f, x, step);
  const Vector dg = field_gradient(g, x, step);
  return df.dot(sigma_at(model, x) * dg);
}

Vector sigma_divergence(const DiffusionModel& model, const Vector& x) {
  const auto n = static_cast<Eigen::Index>(model.dim_state);
  Vector div = Vector::Zero(n);
  if (model.sigma_divergence) {
    model.sigma_divergence({x.data(), static_cast<std::size_t>(n)},
                           {div.data(), static_cast<std::size_t>(n)});
    return div;
  }
  if (model.constant_diffusion) return div;
  const double step = model.derivatives.step;
  Vector probe = x;
  for (Eigen::Index j = 0; j < n; ++j) {
    probe(j) = x(j) + step;
    const Matrix up = sigma_at(model, probe);
    probe(j) = x(j) - step;
    const Matrix down = sigma_at(model, probe);
    probe(j) = x(j);
    div += (up.col(j) - down.col(j)) / (2.0 * step);
  }
  return div;
}

Vector u_field(const DiffusionModel& model, const Vector& x, const Vector& control) {
  return eval_drift(model, x, control) - 0.5 * sigma_divergence(model, x);
}

double u_divergence(const DiffusionModel& model, const Vector& x, const Vector& control) {
  const double step = model.derivatives.step;
  double div = 0.0;
  Vector probe = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    probe(i) = x(i) + step;
    const double up = u_field(model, probe, control)(i);
    probe(i) = x(i) - step;
    const double down = u_field(model, probe, control)(i);
    probe(i) = x(i);
    div += (up - down) / (2.0 * step);
  }
  return div;
}

double drift_1d(const DiffusionModel& model, double x, ConstSpan control) {
  double out = 0.0;
  model.drift({&x, 1}, control, {&out, 1});
  return out;
}

double sigma_1d(const DiffusionModel& model, double x) {
  if (model.dim_noise == 1) {
    double b = 0.0;
    model.diffusion_factor({&x, 1}, {&b, 1});
    return b * b;
  }
  std::vector<double> b(model.dim_noise);
  model.diffusion_factor({&x, 1}, b);
  double s = 0.0;
  for (double v : b) s += v * v;
  return s;
}

double sigma_gradient_1d(const DiffusionModel& model, double x) {
  if (model.sigma_divergence) {
    double out = 0.0;
    model.sigma_divergence({&x, 1}, {&out, 1});
    return out;
  }
  if (model.constant_diffusion) return 0.0;
  const double h = model.derivatives.step;
  return (sigma_1d(model, x + h) - sigma_1d(model, x - h)) / (2.0 * h);
}

double u_divergence_1d(const DiffusionModel& model, double x, ConstSpan control) {
  const double h = model.derivatives.step;
  const double dv = (drift_1d(model, x + h, control) - drift_1d(model, x - h, control)) / (2.0 * h);
  if (model.constant_diffusion) return dv;
  const double d2s =
      (sigma_1d(model, x + h) - 2.0 * sigma_1d(model, x) + sigma_1d(model, x - h)) / (h * h);
  return dv - 0.5 * d2s;
}

namespace {

DiffusionModel scalar_model(std::string name, std::function<double(double)> drift,
                            double diffusion, double obs_gain, double lower, double upper) {
  if (!(diffusion >= 0.0) || !std::isfinite(diffusion))
    throw ConfigError("diffusion coefficient must be finite and non-negative");
  DiffusionModel m;
  m.name = std::move(name);
  m.dim_control = 1;
  m.drift = [drift = std::move(drift)](ConstSpan x, ConstSpan control, MutSpan out) {
    out[0] = drift(x[0]);
    if (!control.empty()) out[0] += control[0];
  };
  const double b = std::sqrt(diffusion);
  m.diffusion_factor = [b](ConstSpan, MutSpan out) { out[0] = b; };
  m.observation = [obs_gain](ConstSpan x, ConstSpan, MutSpan out) { out[0] = obs_gain * x[0]; };
  m.constant_diffusion = true;
  m.domain.lower = Vector::Constant(1, lower);
  m.domain.upper = Vector::Constant(1, upper);
  m.derivatives.step = 1e-5 * (upper - lower);
  return m;
}

}  // namespace

DiffusionModel make_brownian(double diffusion, double obs_gain, double half_width) {
  if (!(half_width > 0.0)) throw ConfigError("brownian: half_width must be positive");
  return scalar_model("brownian", [](double) { return 0.0; }, diffusion, obs_gain, -half_width,
                      half_width);
}

DiffusionModel make_ou(double rate, double diffusion, double obs_gain) {
  if (!(rate > 0.0)) throw ConfigError("ou: rate must be positive");
  if (!(diffusion > 0.0)) throw ConfigError("ou: diffusion must be positive");
  const double sd = std::sqrt(diffusion / (2.0 * rate));
  auto m = scalar_model("ou", [rate](double x) { return -rate * x; }, diffusion, obs_gain,
                        -6.0 * sd, 6.0 * sd);
  m.has_steady_state = true;
  return m;
}

DiffusionModel make_double_well(double scale, double diffusion, double obs_gain) {
  if (!(scale > 0.0)) throw ConfigError("double_well: scale must be positive");
  if (!(diffusion > 0.0)) throw ConfigError("double_well: diffusion must be positive");
  // ln rho_ss drops by 30 nats from the modes at x^2 = 1 + sqrt(60 Sigma / s).
  const double edge = std::sqrt(1.0 + std::sqrt(60.0 * diffusion / scale));
  auto m = scalar_model("double_well", [scale](double x) { return scale * (x - x * x * x); },
                        diffusion, obs_gain, -edge, edge);
  m.has_steady_state = true;
  return m;
}

DiffusionModel concatenate_noise(const DiffusionModel& first, const DiffusionModel& second) {
  if (first.dim_state != second.dim_state)
    throw ConfigError("concatenate_noise: state dimensions differ");
  DiffusionModel m = first;
  m.name = first.name + "+" + second.name;
  m.dim_noise = first.dim_noise + second.dim_noise;
  m.constant_diffusion = first.constant_diffusion && second.constant_diffusion;
  m.sigma_divergence = nullptr;
  const std::size_t n = first.dim_state, r1 = first.dim_noise, r2 = second.dim_noise;
  m.diffusion_factor = [f1 = first.diffusion_factor, f2 = second.diffusion_factor, n, r1,
                        r2](ConstSpan x, MutSpan out) {
    std::vector<double> b1(n * r1), b2(n * r2);
    f1(x, b1);
    f2(x, b2);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t a = 0; a < r1; ++a) out[i * (r1 + r2) + a] = b1[i * r1 + a];
      for (std::size_t a = 0; a < r2; ++a) out[i * (r1 + r2) + r1 + a] = b2[i * r2 + a];
    }
  };
  return m;
}

}  // namespace filterlab
