#include "spreader/config.hpp"

#include <yaml-cpp/yaml.h>

#include <fstream>
#include <set>
#include <sstream>

#include "spreader/errors.hpp"

namespace spreader {

std::string to_string(DepositScaling scaling) {
  return scaling == DepositScaling::LiteralPaper ? "literal" : "conservative";
}

DepositScaling parse_scaling(const std::string& name) {
  if (name == "literal") return DepositScaling::LiteralPaper;
  if (name == "conservative") return DepositScaling::Conservative;
  throw ConfigError("unknown scaling '" + name + "' (expected literal|conservative)");
}

std::string to_string(TriangleSupport support) {
  return support == TriangleSupport::Literal ? "literal" : "sigma-scaled";
}

TriangleSupport parse_triangle_support(const std::string& name) {
  if (name == "literal") return TriangleSupport::Literal;
  if (name == "sigma-scaled") return TriangleSupport::SigmaScaled;
  throw ConfigError("unknown triangle_support '" + name + "' (expected literal|sigma-scaled)");
}

std::string to_string(Integrator integrator) {
  return integrator == Integrator::ForwardEuler ? "euler" : "exact-arc";
}

Integrator parse_integrator(const std::string& name) {
  if (name == "euler") return Integrator::ForwardEuler;
  if (name == "exact-arc") return Integrator::ExactArc;
  throw ConfigError("unknown integrator '" + name + "' (expected euler|exact-arc)");
}

namespace {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read file: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

YAML::Node parse_yaml(const std::string& text, const char* what) {
  try {
    return YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw ConfigError(std::string(what) + ": " + e.what());
  }
}

// Typed access with the dotted field name in every error.
class Reader {
 public:
  Reader(YAML::Node node, std::string path) : node_(std::move(node)), path_(std::move(path)) {}

  bool has(const char* key) const { return node_.IsMap() && node_[key]; }

  Reader child(const char* key) const {
    if (!has(key)) throw ConfigError("missing field '" + name(key) + "'");
    return {node_[key], name(key)};
  }

  template <class T>
  T get(const char* key) const {
    const YAML::Node v = child(key).node_;
    try {
      return v.as<T>();
    } catch (const YAML::Exception&) {
      throw ConfigError("field '" + name(key) + "' has the wrong type");
    }
  }

  template <class T>
  T get_or(const char* key, T fallback) const {
    return has(key) ? get<T>(key) : fallback;
  }

  template <std::size_t N>
  std::array<double, N> array(const char* key) const {
    const Reader r = child(key);
    if (!r.node_.IsSequence() || r.node_.size() != N) {
      throw ConfigError("field '" + name(key) + "' must be a list of " + std::to_string(N) +
                        " numbers");
    }
    std::array<double, N> out{};
    for (std::size_t i = 0; i < N; ++i) {
      try {
        out[i] = r.node_[i].template as<double>();
      } catch (const YAML::Exception&) {
        throw ConfigError("field '" + name(key) + "' entry " + std::to_string(i) +
                          " is not a number");
      }
    }
    return out;
  }

  void only(std::initializer_list<const char*> keys) const {
    if (!node_.IsMap()) throw ConfigError("field '" + path_ + "' must be a mapping");
    const std::set<std::string> allowed(keys.begin(), keys.end());
    for (const auto& kv : node_) {
      const auto key = kv.first.as<std::string>();
      if (!allowed.count(key)) throw ConfigError("unknown field '" + name(key.c_str()) + "'");
    }
  }

  const YAML::Node& node() const { return node_; }
  std::string name(const char* key) const { return path_.empty() ? key : path_ + "." + key; }

 private:
  YAML::Node node_;
  std::string path_;
};

template <class Fn>
auto named(const std::string& field, Fn&& fn) {
  try {
    return fn();
  } catch (const ConfigError& e) {
    throw ConfigError("field '" + field + "': " + e.what());
  }
}

SpreaderControls read_controls(const Reader& r) {
  r.only({"d_left", "d_right", "rpm_left", "rpm_right"});
  return {r.get<double>("d_left"), r.get<double>("d_right"), r.get<double>("rpm_left"),
          r.get<double>("rpm_right")};
}

YAML::Node number(double v) { return YAML::Node(format_double(v)); }

YAML::Node numbers(std::span<const double> values) {
  YAML::Node seq(YAML::NodeType::Sequence);
  for (double v : values) seq.push_back(format_double(v));
  seq.SetStyle(YAML::EmitterStyle::Flow);
  return seq;
}

}  // namespace

ScenarioFile parse_scenario(const std::string& text, const std::filesystem::path& base_dir) {
  const Reader root(parse_yaml(text, "scenario"), "");
  root.only({"field", "prescription", "plan", "dt", "initial_controls", "controller", "horizon",
             "scaling", "triangle_support", "integrator", "threads", "optimizer"});

  ScenarioFile out;
  Scenario& s = out.scenario;

  const Reader field = root.child("field");
  field.only({"side_length", "n_cells", "origin"});
  const auto origin = field.has("origin") ? field.array<2>("origin") : std::array<double, 2>{};
  s.grid = named("field", [&] {
    return FieldGrid(field.get<double>("side_length"), field.get<int>("n_cells"),
                     {origin[0], origin[1]});
  });

  const Reader pres = root.child("prescription");
  pres.only({"uniform", "csv"});
  if (pres.has("uniform") == pres.has("csv")) {
    throw ConfigError("field 'prescription' needs exactly one of 'uniform' or 'csv'");
  }
  s.prescription = named("prescription", [&] {
    if (pres.has("uniform")) {
      return PrescriptionMap(s.grid.n_cells(), pres.get<double>("uniform"));
    }
    std::filesystem::path p = pres.get<std::string>("csv");
    if (p.is_relative()) p = base_dir / p;
    return PrescriptionMap(read_csv(p));
  });

  const Reader plan = root.child("plan");
  plan.only({"start", "segments"});
  const auto start = plan.array<3>("start");
  s.plan.start = {start[0], start[1], start[2]};
  const Reader segs = plan.child("segments");
  if (!segs.node().IsSequence()) throw ConfigError("field 'plan.segments' must be a list");
  for (std::size_t i = 0; i < segs.node().size(); ++i) {
    const Reader seg(segs.node()[i], "plan.segments[" + std::to_string(i) + "]");
    seg.only({"speed", "turn_rate", "duration"});
    s.plan.segments.push_back(
        {seg.get<double>("speed"), seg.get<double>("turn_rate"), seg.get<double>("duration")});
  }

  s.dt = root.get_or<double>("dt", 1.0);
  if (root.has("initial_controls")) s.initial_controls = read_controls(root.child("initial_controls"));
  s.controller = named("controller", [&] {
    return parse_controller(root.get_or<std::string>("controller", "mpc-full"));
  });
  s.horizon = root.get_or<int>("horizon", 5);
  s.scaling = named("scaling", [&] {
    return parse_scaling(root.get_or<std::string>("scaling", "literal"));
  });
  s.triangle_support = named("triangle_support", [&] {
    return parse_triangle_support(root.get_or<std::string>("triangle_support", "literal"));
  });
  s.integrator = named("integrator", [&] {
    return parse_integrator(root.get_or<std::string>("integrator", "euler"));
  });
  s.threads = root.get_or<int>("threads", 1);

  if (root.has("optimizer")) {
    const Reader opt = root.child("optimizer");
    opt.only({"max_iterations", "gradient_tolerance", "step_tolerance", "finite_diff_epsilon",
              "verify_gradient", "gauss_newton", "multi_start", "seed"});
    OptimizerSettings& o = out.optimizer;
    o.max_iterations = opt.get_or<int>("max_iterations", o.max_iterations);
    o.gradient_tolerance = opt.get_or<double>("gradient_tolerance", o.gradient_tolerance);
    o.step_tolerance = opt.get_or<double>("step_tolerance", o.step_tolerance);
    o.finite_diff_epsilon = opt.get_or<double>("finite_diff_epsilon", o.finite_diff_epsilon);
    o.verify_gradient = opt.get_or<bool>("verify_gradient", o.verify_gradient);
    o.gauss_newton = opt.get_or<bool>("gauss_newton", o.gauss_newton);
    o.multi_start = opt.get_or<int>("multi_start", o.multi_start);
    o.seed = opt.get_or<std::uint64_t>("seed", o.seed);
    named("optimizer", [&] {
      o.validate();
      return 0;
    });
  }
  return out;
}

ScenarioFile load_scenario(const std::filesystem::path& path) {
  return parse_scenario(read_file(path), path.parent_path());
}

MachineFile parse_calibration(const std::string& text) {
  const Reader root(parse_yaml(text, "calibration"), "");
  root.only({"d", "sigma_d", "psi", "sigma_psi", "constraints"});
  MachineFile out;
  out.calibration.d_coeffs = root.array<2>("d");
  out.calibration.sigma_d_coeffs = root.array<3>("sigma_d");
  out.calibration.psi_coeffs = root.array<3>("psi");
  out.calibration.sigma_psi_coeffs = root.array<3>("sigma_psi");

  const Reader c = root.child("constraints");
  c.only({"d_min", "d_max", "rpm_min", "rpm_max", "d_rate_max", "rpm_rate_max"});
  ControlConstraints& k = out.constraints;
  k.d_min = c.get<double>("d_min");
  k.d_max = c.get<double>("d_max");
  k.rpm_min = c.get<double>("rpm_min");
  k.rpm_max = c.get<double>("rpm_max");
  k.d_rate_max = c.get<double>("d_rate_max");
  k.rpm_rate_max = c.get<double>("rpm_rate_max");
  named("constraints", [&] {
    k.validate();
    return 0;
  });
  validate_calibration(out.calibration, out.constraints);
  return out;
}

MachineFile load_calibration(const std::filesystem::path& path) {
  return parse_calibration(read_file(path));
}

namespace {

YAML::Node scenario_node(const ScenarioFile& file) {
  const Scenario& s = file.scenario;
  YAML::Node root;
  root["field"]["side_length"] = number(s.grid.side_length());
  root["field"]["n_cells"] = s.grid.n_cells();
  const double origin[] = {s.grid.origin().x, s.grid.origin().y};
  root["field"]["origin"] = numbers(origin);

  const CellMatrix& p = s.prescription.values();
  if (p.size() > 0 && (p.array() == p(0, 0)).all()) {
    root["prescription"]["uniform"] = number(p(0, 0));
  } else {
    root["prescription"]["csv"] = "prescription.csv";
  }

  const double start[] = {s.plan.start.x, s.plan.start.y, s.plan.start.phi};
  root["plan"]["start"] = numbers(start);
  YAML::Node segs(YAML::NodeType::Sequence);
  for (const auto& seg : s.plan.segments) {
    YAML::Node n;
    n["speed"] = number(seg.speed);
    n["turn_rate"] = number(seg.turn_rate);
    n["duration"] = number(seg.duration);
    n.SetStyle(YAML::EmitterStyle::Flow);
    segs.push_back(n);
  }
  root["plan"]["segments"] = segs;
  root["dt"] = number(s.dt);
  root["initial_controls"]["d_left"] = number(s.initial_controls.d_left);
  root["initial_controls"]["d_right"] = number(s.initial_controls.d_right);
  root["initial_controls"]["rpm_left"] = number(s.initial_controls.rpm_left);
  root["initial_controls"]["rpm_right"] = number(s.initial_controls.rpm_right);
  root["controller"] = to_string(s.controller);
  root["horizon"] = s.horizon;
  root["scaling"] = to_string(s.scaling);
  root["triangle_support"] = to_string(s.triangle_support);
  root["integrator"] = to_string(s.integrator);
  root["threads"] = s.threads;

  const OptimizerSettings& o = file.optimizer;
  root["optimizer"]["max_iterations"] = o.max_iterations;
  root["optimizer"]["gradient_tolerance"] = number(o.gradient_tolerance);
  root["optimizer"]["step_tolerance"] = number(o.step_tolerance);
  root["optimizer"]["finite_diff_epsilon"] = number(o.finite_diff_epsilon);
  root["optimizer"]["verify_gradient"] = o.verify_gradient;
  root["optimizer"]["gauss_newton"] = o.gauss_newton;
  root["optimizer"]["multi_start"] = o.multi_start;
  root["optimizer"]["seed"] = o.seed;
  return root;
}

YAML::Node machine_node(const MachineFile& file) {
  YAML::Node root;
  root["d"] = numbers(file.calibration.d_coeffs);
  root["sigma_d"] = numbers(file.calibration.sigma_d_coeffs);
  root["psi"] = numbers(file.calibration.psi_coeffs);
  root["sigma_psi"] = numbers(file.calibration.sigma_psi_coeffs);
  const ControlConstraints& c = file.constraints;
  root["constraints"]["d_min"] = number(c.d_min);
  root["constraints"]["d_max"] = number(c.d_max);
  root["constraints"]["rpm_min"] = number(c.rpm_min);
  root["constraints"]["rpm_max"] = number(c.rpm_max);
  root["constraints"]["d_rate_max"] = number(c.d_rate_max);
  root["constraints"]["rpm_rate_max"] = number(c.rpm_rate_max);
  return root;
}

std::string emit(const YAML::Node& node) {
  YAML::Emitter out;
  out << node;
  return std::string(out.c_str()) + "\n";
}

}  // namespace

std::string to_yaml(const ScenarioFile& file) { return emit(scenario_node(file)); }
std::string to_yaml(const MachineFile& file) { return emit(machine_node(file)); }

std::uint64_t fnv1a(const std::string& text) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

void write_trace_csv(std::ostream& out, const RunRecord& record) {
  out << "k,t,x,y,phi,D_l,D_r,rpm_l,rpm_r,deposit_mass,cost\n";
  for (const auto& s : record.steps) {
    out << s.k << ',' << format_double(s.t) << ',' << format_double(s.pose.x) << ','
        << format_double(s.pose.y) << ',' << format_double(s.pose.phi) << ','
        << format_double(s.controls.d_left) << ',' << format_double(s.controls.d_right) << ','
        << format_double(s.controls.rpm_left) << ',' << format_double(s.controls.rpm_right) << ','
        << format_double(s.deposit_mass) << ',' << format_double(s.cost) << '\n';
  }
}

void write_summary(std::ostream& out, const RunRecord& record, const ScenarioFile& scenario,
                   const MachineFile& machine) {
  YAML::Node config;
  config["scenario"] = scenario_node(scenario);
  config["machine"] = machine_node(machine);
  const std::string effective = emit(config);
  char hash[17];
  std::snprintf(hash, sizeof(hash), "%016llx",
                static_cast<unsigned long long>(fnv1a(effective)));

  YAML::Node root;
  root["controller"] = record.controller;
  root["final_cost"] = number(record.final_cost);
  root["steps"] = record.steps.size();
  root["controller_wall_clock_s"] = number(record.controller_wall_clock);
  root["aborted"] = record.aborted;
  if (record.aborted) root["diagnostic"] = record.diagnostic;
  root["settings_hash"] = std::string(hash);
  root["effective_config"] = config;
  out << emit(root);
}

}  // namespace spreader
