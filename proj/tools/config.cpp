#include "config.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "fpb/error.hpp"

namespace fpb::cli {

namespace pt = boost::property_tree;

namespace {

[[noreturn]] void fail(const std::string& msg) { throw Error(ErrorCode::ConfigError, msg); }

class Section {
 public:
  Section(const pt::ptree& tree, std::string name) : tree_(tree), name_(std::move(name)) {}

  bool has(const std::string& key) const { return tree_.find(key) != tree_.not_found(); }

  std::string raw(const std::string& key) const {
    auto v = tree_.get_optional<std::string>(key);
    if (!v) fail("missing key [" + name_ + "] " + key);
    return *v;
  }

  double number(const std::string& key) const { return to_number(key, raw(key)); }
  double number(const std::string& key, double fallback) const { return has(key) ? number(key) : fallback; }

  std::int64_t integer(const std::string& key, std::int64_t fallback) const {
    if (!has(key)) return fallback;
    const std::string s = raw(key);
    std::size_t used = 0;
    std::int64_t v = 0;
    try {
      v = std::stoll(s, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || s.find_first_not_of(" \t", used) != std::string::npos) {
      fail("[" + name_ + "] " + key + ": not an integer: '" + s + "'");
    }
    return v;
  }

  std::vector<double> list(const std::string& key) const {
    std::string s = raw(key);
    std::replace(s.begin(), s.end(), ',', ' ');
    std::istringstream in(s);
    std::vector<double> out;
    std::string tok;
    while (in >> tok) out.push_back(to_number(key, tok));
    if (out.empty()) fail("[" + name_ + "] " + key + ": empty list");
    return out;
  }

  std::string word(const std::string& key, const std::string& fallback) const {
    if (!has(key)) return fallback;
    std::string s = raw(key);
    s.erase(0, s.find_first_not_of(" \t"));
    s.erase(s.find_last_not_of(" \t") + 1);
    return s;
  }

  void only(std::initializer_list<const char*> keys) const {
    std::set<std::string> known(keys.begin(), keys.end());
    for (const auto& [k, v] : tree_) {
      if (!known.count(k)) fail("unknown key [" + name_ + "] " + k);
    }
  }

 private:
  double to_number(const std::string& key, const std::string& s) const {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(s, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || s.find_first_not_of(" \t", used) != std::string::npos) {
      fail("[" + name_ + "] " + key + ": not a number: '" + s + "'");
    }
    return v;
  }

  const pt::ptree& tree_;
  std::string name_;
};

Vector to_vector(const std::vector<double>& v) { return Eigen::Map<const Vector>(v.data(), Eigen::Index(v.size())); }

Matrix square(const Section& sec, const std::string& key, int dim) {
  const auto v = sec.list(key);
  if (v.size() != static_cast<std::size_t>(dim * dim)) {
    fail("[model] " + key + ": expected " + std::to_string(dim * dim) + " entries, got " + std::to_string(v.size()));
  }
  Matrix m(dim, dim);
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j) m(i, j) = v[static_cast<std::size_t>(i * dim + j)];
  return m;
}

Vector vec(const Section& sec, const std::string& key, int dim) {
  const auto v = sec.list(key);
  if (v.size() != static_cast<std::size_t>(dim)) {
    fail("[" + key + "]: expected " + std::to_string(dim) + " entries, got " + std::to_string(v.size()));
  }
  return to_vector(v);
}

DiffusionModel parse_model(const Section& sec) {
  sec.only({"dim", "D", "g", "v", "n"});
  const auto dim = sec.integer("dim", -1);
  if (dim < 1) fail("missing or invalid key [model] dim");
  const int m = static_cast<int>(dim);
  DiffusionModel model;
  model.D = square(sec, "D", m);
  if (sec.has("g")) model.g = square(sec, "g", m);
  model.v = sec.has("v") ? vec(sec, "v", m) : Vector::Zero(m);
  model.n = sec.has("n") ? vec(sec, "n", m) : Vector::Unit(m, m - 1);
  if (m == 1) {
    // the half-line needs no frame
    if (!(model.D(0, 0) > 0.0)) fail("[model] D must be positive");
    if (model.g.size() != 0 && model.g(0, 0) != 1.0) fail("[model] g must be 1 in one dimension");
    if (!(model.n(0) > 0.0)) fail("[model] n must point into the half-line");
    model.g = Matrix::Identity(1, 1);
    model.n(0) = 1.0;
    return model;
  }
  try {
    return validate_model(model).model;
  } catch (const Error& e) {
    fail(std::string("[model] ") + e.what());
  }
}

}  // namespace

ExperimentConfig parse_config(const std::string& text) {
  pt::ptree tree;
  std::istringstream in(text);
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    fail(std::string("malformed config: ") + e.what());
  }

  ExperimentConfig cfg;
  for (const auto& [name, body] : tree) {
    if (body.empty() && !body.data().empty()) fail("key '" + name + "' outside a section");
    static const std::set<std::string> sections = {"model", "boundary", "lattice", "solver", "sweep", "output"};
    if (!sections.count(name)) fail("unknown section [" + name + "]");
  }

  if (auto t = tree.get_child_optional("model")) cfg.model = parse_model(Section(*t, "model"));

  if (auto t = tree.get_child_optional("boundary")) {
    Section sec(*t, "boundary");
    sec.only({"sigma", "l", "v_surface"});
    BoundaryCoefficients b;
    b.sigma = sec.number("sigma");
    b.l_upsilon = sec.number("l", 0.0);
    if (b.sigma < 0.0 || b.l_upsilon < 0.0) fail("[boundary] sigma and l must be non-negative");
    if (sec.has("v_surface")) b.v_surface = to_vector(sec.list("v_surface"));
    cfg.boundary = b;
  }

  if (auto t = tree.get_child_optional("lattice")) {
    Section sec(*t, "lattice");
    sec.only({"tau_a", "walkers", "steps", "n0", "seed", "jump_mode"});
    LatticeBlock l;
    l.tau_a = sec.number("tau_a");
    if (!(l.tau_a > 0.0)) fail("[lattice] tau_a must be positive");
    const auto walkers = sec.integer("walkers", static_cast<std::int64_t>(l.walkers));
    if (walkers < 1) fail("[lattice] walkers must be positive");
    l.walkers = static_cast<std::size_t>(walkers);
    l.steps = sec.integer("steps", l.steps);
    if (l.steps < 0) fail("[lattice] steps must be non-negative");
    l.n0 = static_cast<int>(sec.integer("n0", 0));
    if (l.n0 < 0) fail("[lattice] n0 must be non-negative");
    l.seed = static_cast<std::uint64_t>(sec.integer("seed", 1));
    const std::string mode = sec.word("jump_mode", "auto");
    if (mode == "auto") {
      l.jump_mode = SurfaceJumpMode::Auto;
    } else if (mode == "exact") {
      l.jump_mode = SurfaceJumpMode::Exact;
    } else if (mode == "gaussian") {
      l.jump_mode = SurfaceJumpMode::Gaussian;
    } else {
      fail("[lattice] jump_mode must be auto, exact or gaussian");
    }
    cfg.lattice = l;
  }

  if (auto t = tree.get_child_optional("solver")) {
    Section sec(*t, "solver");
    sec.only({"depth", "width", "dz", "dx", "T", "dt", "start", "source", "ledger_every", "compare_walk"});
    SolverBlock s;
    s.depth = sec.number("depth");
    s.width = sec.number("width", 0.0);
    s.dz = sec.number("dz");
    s.dx = sec.number("dx", 0.0);
    s.T = sec.number("T");
    s.dt = sec.number("dt", 0.0);
    s.start = to_vector(sec.list("start"));
    const std::string src = sec.word("source", "spread");
    if (src == "spread") {
      s.source = SourceShape::Spread;
    } else if (src == "cell") {
      s.source = SourceShape::Cell;
    } else {
      fail("[solver] source must be spread or cell");
    }
    s.ledger_every = static_cast<int>(sec.integer("ledger_every", 0));
    const std::string cmp = sec.word("compare_walk", "false");
    if (cmp != "true" && cmp != "false") fail("[solver] compare_walk must be true or false");
    s.compare_walk = cmp == "true";
    if (!(s.T > 0.0)) fail("[solver] T must be positive");
    cfg.solver = s;
  }

  if (auto t = tree.get_child_optional("sweep")) {
    Section sec(*t, "sweep");
    sec.only({"tau", "zeta", "s"});
    if (sec.has("tau")) cfg.tau = sec.list("tau");
    if (sec.has("zeta")) cfg.zeta = sec.list("zeta");
    if (sec.has("s")) cfg.s = sec.list("s");
    if (!std::is_sorted(cfg.tau.begin(), cfg.tau.end())) fail("[sweep] tau must be ascending");
    for (double t : cfg.tau)
      if (t < 0.0) fail("[sweep] tau must be non-negative");
  }

  if (auto t = tree.get_child_optional("output")) {
    Section sec(*t, "output");
    sec.only({"dir"});
    cfg.out_dir = sec.word("dir", "out");
  }
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail("cannot read config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

const DiffusionModel& require_model(const ExperimentConfig& cfg) {
  if (!cfg.model) fail("missing section [model]");
  return *cfg.model;
}

const BoundaryCoefficients& require_boundary(const ExperimentConfig& cfg) {
  if (!cfg.boundary) fail("missing section [boundary]");
  return *cfg.boundary;
}

const LatticeBlock& require_lattice(const ExperimentConfig& cfg) {
  if (!cfg.lattice) fail("missing section [lattice]");
  return *cfg.lattice;
}

const SolverBlock& require_solver(const ExperimentConfig& cfg) {
  if (!cfg.solver) fail("missing section [solver]");
  return *cfg.solver;
}

}  // namespace fpb::cli
