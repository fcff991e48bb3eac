#include "lpvlab/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "lpvlab/freq.hpp"
#include "lpvlab/sim.hpp"

namespace lpvlab::cli {

using json = nlohmann::json;
using lpvmodel::AffineLpvSS;
using lpvmodel::AffineMat;
using lpvmodel::Box;
using matlib::Matrix;
using matlib::SymMatrix;

namespace {

namespace fs = std::filesystem;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write file: " + path.string());
  out << content;
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

// ---- config parsing -------------------------------------------------------

const json& need(const json& j, const std::string& key, const std::string& ctx) {
  if (!j.is_object() || !j.contains(key))
    throw ConfigError("config: missing field '" + ctx + "." + key + "'");
  return j.at(key);
}

double as_num(const json& v, const std::string& ctx) {
  if (!v.is_number()) throw ConfigError("config: '" + ctx + "' must be a number");
  return v.get<double>();
}

int as_int(const json& v, const std::string& ctx) {
  if (!v.is_number_integer()) throw ConfigError("config: '" + ctx + "' must be an integer");
  return v.get<int>();
}

std::string as_str(const json& v, const std::string& ctx) {
  if (!v.is_string()) throw ConfigError("config: '" + ctx + "' must be a string");
  return v.get<std::string>();
}

std::vector<double> as_num_list(const json& v, const std::string& ctx) {
  if (!v.is_array()) throw ConfigError("config: '" + ctx + "' must be an array of numbers");
  std::vector<double> r;
  for (const auto& e : v) r.push_back(as_num(e, ctx));
  return r;
}

std::vector<int> as_int_list(const json& v, const std::string& ctx) {
  if (!v.is_array()) throw ConfigError("config: '" + ctx + "' must be an array of integers");
  std::vector<int> r;
  for (const auto& e : v) r.push_back(as_int(e, ctx));
  return r;
}

Matrix parse_matrix(const json& v, const std::string& ctx) {
  if (!v.is_array() || v.empty())
    throw ConfigError("config: '" + ctx + "' must be a non-empty array of rows");
  const int rows = static_cast<int>(v.size());
  int cols = -1;
  for (const auto& row : v) {
    if (!row.is_array()) throw ConfigError("config: '" + ctx + "' rows must be arrays");
    if (cols < 0) cols = static_cast<int>(row.size());
    if (static_cast<int>(row.size()) != cols)
      throw ConfigError("config: '" + ctx + "' rows have unequal lengths");
  }
  Matrix m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = as_num(v.at(i).at(j), ctx);
  return m;
}

// Coefficient list [M0, M1, ...]; a single entry means a rho-constant matrix.
AffineMat parse_affine(const json& v, int n_rho, const std::string& ctx) {
  if (!v.is_array() || v.empty())
    throw ConfigError("config: '" + ctx + "' must be a non-empty array of matrices");
  AffineMat m;
  for (const auto& e : v) m.coef.push_back(parse_matrix(e, ctx));
  for (const auto& c : m.coef)
    if (c.rows != m.coef.front().rows || c.cols != m.coef.front().cols)
      throw ConfigError("config: '" + ctx + "' coefficient matrices differ in size");
  if (static_cast<int>(m.coef.size()) == 1) {
    for (int k = 0; k < n_rho; ++k) m.coef.emplace_back(m.rows(), m.cols());
  } else if (static_cast<int>(m.coef.size()) != n_rho + 1) {
    throw ConfigError("config: '" + ctx + "' needs 1 or n_rho+1 coefficient matrices");
  }
  return m;
}

Box parse_box(const json& v, const std::string& ctx) {
  if (!v.is_array()) throw ConfigError("config: '" + ctx + "' must be an array of [lo, hi] pairs");
  Box b;
  for (const auto& e : v) {
    auto pair = as_num_list(e, ctx);
    if (pair.size() != 2) throw ConfigError("config: '" + ctx + "' entries must be [lo, hi]");
    b.push_back({pair[0], pair[1]});
  }
  return b;
}

lpvmodel::TransferFunction parse_tf(const json& v, const std::string& ctx) {
  lpvmodel::TransferFunction tf;
  tf.num = as_num_list(need(v, "num", ctx), ctx + ".num");
  tf.den = as_num_list(need(v, "den", ctx), ctx + ".den");
  return tf;
}

lpvmodel::SchedulingMap parse_scheduling(const json& v) {
  lpvmodel::SchedulingMap mu;
  mu.n_x_in = as_int(need(v, "n_x_in", "scheduling"), "scheduling.n_x_in");
  mu.range = parse_box(need(v, "range", "scheduling"), "scheduling.range");
  const json& comps = need(v, "components", "scheduling");
  if (!comps.is_array() || comps.empty())
    throw ConfigError("config: 'scheduling.components' must be a non-empty array");
  for (const auto& comp : comps) {
    if (!comp.is_array()) throw ConfigError("config: scheduling components must be term arrays");
    std::vector<lpvmodel::SchedulingTerm> terms;
    for (const auto& t : comp) {
      lpvmodel::SchedulingTerm term;
      term.coef = as_num(need(t, "coef", "scheduling term"), "scheduling term coef");
      auto expo = as_int_list(need(t, "expo", "scheduling term"), "scheduling term expo");
      term.expo = expo;
      terms.push_back(std::move(term));
    }
    mu.components.push_back(std::move(terms));
  }
  return mu;
}

lpvmodel::Wiring parse_wiring(const json& v) {
  lpvmodel::Wiring w;
  for (const auto& e : need(v, "w_names", "wiring")) w.w_names.push_back(as_str(e, "wiring.w_names"));
  for (const auto& e : need(v, "y_names", "wiring")) w.y_names.push_back(as_str(e, "wiring.y_names"));
  const json& eqs = need(v, "uc", "wiring");
  if (!eqs.is_array()) throw ConfigError("config: 'wiring.uc' must be an array of equations");
  for (const auto& eq : eqs) {
    if (!eq.is_array()) throw ConfigError("config: wiring equations must be term arrays");
    std::vector<lpvmodel::WiringTerm> terms;
    for (const auto& t : eq) {
      lpvmodel::WiringTerm term;
      term.coef = as_num(need(t, "coef", "wiring term"), "wiring term coef");
      term.signal = as_str(need(t, "signal", "wiring term"), "wiring term signal");
      terms.push_back(std::move(term));
    }
    w.uc_equations.push_back(std::move(terms));
  }
  return w;
}

AffineLpvSS parse_plant(const json& v, int n_rho) {
  AffineLpvSS p;
  p.n_rho = n_rho;
  p.P = parse_box(need(v, "P", "plant"), "plant.P");
  p.A = parse_affine(need(v, "A", "plant"), n_rho, "plant.A");
  p.n_x = p.A.rows();
  p.Bw = parse_affine(need(v, "Bw", "plant"), n_rho, "plant.Bw");
  p.n_w = p.Bw.cols();
  p.Bu = parse_affine(need(v, "Bu", "plant"), n_rho, "plant.Bu");
  p.n_u = p.Bu.cols();
  p.Cz = parse_affine(need(v, "Cz", "plant"), n_rho, "plant.Cz");
  p.n_z = p.Cz.rows();
  p.Cy = parse_affine(need(v, "Cy", "plant"), n_rho, "plant.Cy");
  p.n_y = p.Cy.rows();
  auto opt = [&](const char* key, int r, int c) {
    if (v.contains(key)) return parse_affine(v.at(key), n_rho, std::string("plant.") + key);
    return AffineMat::constant(Matrix(r, c), n_rho);
  };
  p.Dzw = opt("Dzw", p.n_z, p.n_w);
  p.Dzu = opt("Dzu", p.n_z, p.n_u);
  p.Dyw = opt("Dyw", p.n_y, p.n_w);
  p.Dyu = opt("Dyu", p.n_y, p.n_u);
  return p;
}

AffineLpvSS parse_controller(const json& v, int n_rho, const Box& p_box) {
  AffineLpvSS c;
  c.n_rho = n_rho;
  c.P = p_box;
  c.A = parse_affine(need(v, "A", "controller"), n_rho, "controller.A");
  c.n_x = c.A.rows();
  c.Bu = parse_affine(need(v, "B", "controller"), n_rho, "controller.B");
  c.n_u = c.Bu.cols();
  c.Cy = parse_affine(need(v, "C", "controller"), n_rho, "controller.C");
  c.n_y = c.Cy.rows();
  c.Dyu = parse_affine(need(v, "D", "controller"), n_rho, "controller.D");
  c.n_w = 0;
  c.n_z = 0;
  c.Bw = AffineMat::constant(Matrix(c.n_x, 0), n_rho);
  c.Cz = AffineMat::constant(Matrix(0, c.n_x), n_rho);
  c.Dzw = AffineMat::constant(Matrix(0, 0), n_rho);
  c.Dzu = AffineMat::constant(Matrix(0, c.n_u), n_rho);
  c.Dyw = AffineMat::constant(Matrix(c.n_y, 0), n_rho);
  return c;
}

// ---- deterministic text output --------------------------------------------

std::string num12(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

std::string num_svg(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string num_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

json mat_to_json(const Matrix& m) {
  json rows = json::array();
  for (int i = 0; i < m.rows; ++i) {
    json r = json::array();
    for (int j = 0; j < m.cols; ++j) r.push_back(m(i, j));
    rows.push_back(std::move(r));
  }
  return rows;
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

// ---- SVG emission ----------------------------------------------------------

const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b",
                          "#e377c2", "#7f7f7f", "#bcbd22", "#17becf", "#aec7e8", "#ffbb78"};
constexpr int kPaletteSize = 12;

struct Series {
  std::string label;
  std::string color;
  std::vector<std::pair<double, double>> pts;
};

std::string svg_line_plot(const std::string& title, const std::string& xlabel,
                          const std::string& ylabel, const std::vector<Series>& series) {
  constexpr double W = 860, H = 520, L = 70, R = 660, T = 40, B = 470;
  double xmin = 0, xmax = 1, ymin = 0, ymax = 1;
  bool first = true;
  for (const auto& s : series)
    for (auto [x, y] : s.pts) {
      if (!std::isfinite(x) || !std::isfinite(y)) continue;
      if (first) {
        xmin = xmax = x;
        ymin = ymax = y;
        first = false;
      } else {
        xmin = std::min(xmin, x);
        xmax = std::max(xmax, x);
        ymin = std::min(ymin, y);
        ymax = std::max(ymax, y);
      }
    }
  if (xmax - xmin < 1e-12) xmax = xmin + 1.0;
  double pad = 0.05 * (ymax - ymin);
  if (pad < 1e-12) pad = 1.0;
  ymin -= pad;
  ymax += pad;
  auto px = [&](double x) { return L + (x - xmin) / (xmax - xmin) * (R - L); };
  auto py = [&](double y) { return B - (y - ymin) / (ymax - ymin) * (B - T); };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
      << "\" viewBox=\"0 0 " << W << " " << H << "\">\n";
  svg << "<rect width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n";
  svg << "<text x=\"" << L << "\" y=\"24\" font-family=\"monospace\" font-size=\"15\">" << title
      << "</text>\n";
  for (int i = 0; i <= 5; ++i) {
    double fx = xmin + (xmax - xmin) * i / 5.0;
    double fy = ymin + (ymax - ymin) * i / 5.0;
    svg << "<line x1=\"" << num_svg(px(fx)) << "\" y1=\"" << T << "\" x2=\"" << num_svg(px(fx))
        << "\" y2=\"" << B << "\" stroke=\"#dddddd\" stroke-width=\"1\"/>\n";
    svg << "<line x1=\"" << L << "\" y1=\"" << num_svg(py(fy)) << "\" x2=\"" << R << "\" y2=\""
        << num_svg(py(fy)) << "\" stroke=\"#dddddd\" stroke-width=\"1\"/>\n";
    svg << "<text x=\"" << num_svg(px(fx)) << "\" y=\"" << B + 18
        << "\" font-family=\"monospace\" font-size=\"11\" text-anchor=\"middle\">" << num_label(fx)
        << "</text>\n";
    svg << "<text x=\"" << L - 6 << "\" y=\"" << num_svg(py(fy) + 4)
        << "\" font-family=\"monospace\" font-size=\"11\" text-anchor=\"end\">" << num_label(fy)
        << "</text>\n";
  }
  svg << "<rect x=\"" << L << "\" y=\"" << T << "\" width=\"" << R - L << "\" height=\"" << B - T
      << "\" fill=\"none\" stroke=\"black\" stroke-width=\"1\"/>\n";
  svg << "<text x=\"" << (L + R) / 2 << "\" y=\"" << B + 38
      << "\" font-family=\"monospace\" font-size=\"12\" text-anchor=\"middle\">" << xlabel
      << "</text>\n";
  svg << "<text x=\"18\" y=\"" << (T + B) / 2
      << "\" font-family=\"monospace\" font-size=\"12\" text-anchor=\"middle\" "
         "transform=\"rotate(-90 18 "
      << (T + B) / 2 << ")\">" << ylabel << "</text>\n";

  for (const auto& s : series) {
    std::ostringstream run;
    bool open = false;
    auto flush = [&]() {
      if (open) {
        svg << "<polyline fill=\"none\" stroke=\"" << s.color
            << "\" stroke-width=\"1.3\" points=\"" << run.str() << "\"/>\n";
        run.str("");
        open = false;
      }
    };
    for (auto [x, y] : s.pts) {
      if (!std::isfinite(x) || !std::isfinite(y)) {
        flush();
        continue;
      }
      run << num_svg(px(x)) << "," << num_svg(py(std::clamp(y, ymin, ymax))) << " ";
      open = true;
    }
    flush();
  }
  double ly = 52;
  for (const auto& s : series) {
    svg << "<line x1=\"676\" y1=\"" << num_svg(ly - 4) << "\" x2=\"700\" y2=\"" << num_svg(ly - 4)
        << "\" stroke=\"" << s.color << "\" stroke-width=\"2\"/>\n";
    svg << "<text x=\"706\" y=\"" << num_svg(ly) << "\" font-family=\"monospace\" font-size=\"11\">"
        << s.label << "</text>\n";
    ly += 16;
    if (ly > 500) break;  // legend overflow: remaining labels elided
  }
  svg << "</svg>\n";
  return svg.str();
}

// Cell classes: equilibrium cells on top, then reach (split by whether the
// decrease condition holds there), then the decrease set itself.
std::string svg_heatmap(const std::string& title, const analysis::GridSet& s_hat,
                        const analysis::GridSet& xi_bar, const analysis::GridSet& r) {
  const auto& g = s_hat.grid;
  const int n0 = g.res[0], n1 = g.res[1];
  constexpr double L = 70, T = 46, SIDE = 600;
  const double W = L + SIDE + 190, H = T + SIDE + 60;
  const double cw = SIDE / n0, ch = SIDE / n1;
  auto cell_class = [&](long idx) -> int {
    if (xi_bar.mask[idx]) return 3;
    if (r.mask[idx]) return s_hat.mask[idx] ? 2 : 4;
    if (s_hat.mask[idx]) return 1;
    return 0;
  };
  const char* fill[] = {"", "#cfe3f7", "#ff9e4a", "#16348c", "#d62728"};
  const char* label[] = {"", "decrease set", "reach within", "equilibria", "reach outside"};

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
      << "\" viewBox=\"0 0 " << W << " " << H << "\">\n";
  svg << "<rect width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n";
  svg << "<text x=\"" << L << "\" y=\"26\" font-family=\"monospace\" font-size=\"15\">" << title
      << "</text>\n";
  for (int i1 = 0; i1 < n1; ++i1) {
    double y = T + (n1 - 1 - i1) * ch;
    int run_class = -1;
    int run_start = 0;
    auto flush = [&](int end) {
      if (run_class > 0) {
        svg << "<rect x=\"" << num_svg(L + run_start * cw) << "\" y=\"" << num_svg(y)
            << "\" width=\"" << num_svg((end - run_start) * cw) << "\" height=\""
            << num_svg(ch + 0.15) << "\" fill=\"" << fill[run_class] << "\"/>\n";
      }
    };
    for (int i0 = 0; i0 < n0; ++i0) {
      int c = cell_class(static_cast<long>(i0) * n1 + i1);
      if (c != run_class) {
        flush(i0);
        run_class = c;
        run_start = i0;
      }
    }
    flush(n0);
  }
  svg << "<rect x=\"" << L << "\" y=\"" << T << "\" width=\"" << SIDE << "\" height=\"" << SIDE
      << "\" fill=\"none\" stroke=\"black\" stroke-width=\"1\"/>\n";
  svg << "<text x=\"" << num_svg(L) << "\" y=\"" << T + SIDE + 18
      << "\" font-family=\"monospace\" font-size=\"11\">" << num_label(g.box[0][0])
      << "</text>\n";
  svg << "<text x=\"" << num_svg(L + SIDE) << "\" y=\"" << T + SIDE + 18
      << "\" font-family=\"monospace\" font-size=\"11\" text-anchor=\"end\">"
      << num_label(g.box[0][1]) << "</text>\n";
  svg << "<text x=\"" << num_svg(L + SIDE / 2) << "\" y=\"" << T + SIDE + 34
      << "\" font-family=\"monospace\" font-size=\"12\" text-anchor=\"middle\">xi_1</text>\n";
  svg << "<text x=\"" << L - 8 << "\" y=\"" << num_svg(T + SIDE)
      << "\" font-family=\"monospace\" font-size=\"11\" text-anchor=\"end\">"
      << num_label(g.box[1][0]) << "</text>\n";
  svg << "<text x=\"" << L - 8 << "\" y=\"" << num_svg(T + 10)
      << "\" font-family=\"monospace\" font-size=\"11\" text-anchor=\"end\">"
      << num_label(g.box[1][1]) << "</text>\n";
  svg << "<text x=\"22\" y=\"" << num_svg(T + SIDE / 2)
      << "\" font-family=\"monospace\" font-size=\"12\" text-anchor=\"middle\" "
         "transform=\"rotate(-90 22 "
      << num_svg(T + SIDE / 2) << ")\">xi_2</text>\n";
  double ly = T + 14;
  for (int c : {1, 2, 4, 3}) {
    svg << "<rect x=\"" << L + SIDE + 16 << "\" y=\"" << num_svg(ly - 10)
        << "\" width=\"14\" height=\"14\" fill=\"" << fill[c] << "\"/>\n";
    svg << "<text x=\"" << L + SIDE + 36 << "\" y=\"" << num_svg(ly + 1)
        << "\" font-family=\"monospace\" font-size=\"11\">" << label[c] << "</text>\n";
    ly += 22;
  }
  svg << "</svg>\n";
  return svg.str();
}

// ---- report plumbing -------------------------------------------------------

void write_report(const RunReport& rep, const fs::path& out_dir) {
  json j;
  j["command"] = rep.command;
  j["config_hash"] = rep.config_hash;
  j["summary"] = rep.summary;
  j["exit_code"] = rep.exit_code;
  j["outputs"] = rep.output_paths;
  write_json(out_dir / "report.json", j);
}

fs::path prep_out_dir(const CmdOptions& opts) {
  fs::path dir(opts.out_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create output directory: " + dir.string());
  return dir;
}

SymMatrix read_x_file(const std::string& path, int n) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw ConfigError(std::string("verify-x file: ") + e.what());
  }
  const json* rows = &j;
  if (j.is_object()) rows = &need(j, "X", "verify-x");
  Matrix m = parse_matrix(*rows, "verify-x matrix");
  if (m.rows != n || m.cols != n)
    throw ConfigError("verify-x matrix size does not match the model state dimension");
  return SymMatrix::from(m);
}

std::string status_str(sdp::Status s) { return sdp::to_string(s); }

}  // namespace

// ---- public API ------------------------------------------------------------

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

lpvmodel::ClosedLoopLpv ExperimentConfig::closed_loop() const {
  return lpvmodel::interconnect(plant, controller, wiring);
}

lpvmodel::ClosedLoopLpv ExperimentConfig::weighted_closed_loop() const {
  return lpvmodel::augment_weights(closed_loop(), w_r, w_d, w_e);
}

lpvmodel::NlClosedLoop ExperimentConfig::nonlinear() const {
  return lpvmodel::substitute_scheduling(closed_loop(), scheduling);
}

ExperimentConfig load_config(const std::string& path) {
  std::string raw = read_file(path);
  json j;
  try {
    j = json::parse(raw);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config parse: ") + e.what());
  }

  ExperimentConfig cfg;
  cfg.hash = fnv1a_hex(raw);
  try {
    cfg.scheduling = parse_scheduling(need(j, "scheduling", "config"));
    const int n_rho = cfg.scheduling.n_rho();
    cfg.plant = parse_plant(need(j, "plant", "config"), n_rho);
    cfg.controller = parse_controller(need(j, "controller", "config"), n_rho, cfg.plant.P);
    cfg.wiring = parse_wiring(need(j, "wiring", "config"));

    cfg.w_r = lpvmodel::TransferFunction::gain(1.0);
    cfg.w_d = lpvmodel::TransferFunction::gain(1.0);
    cfg.w_e = lpvmodel::TransferFunction::gain(1.0);
    if (j.contains("weights")) {
      const json& w = j.at("weights");
      if (w.contains("w_r")) cfg.w_r = parse_tf(w.at("w_r"), "weights.w_r");
      if (w.contains("w_d")) cfg.w_d = parse_tf(w.at("w_d"), "weights.w_d");
      if (w.contains("w_e")) cfg.w_e = parse_tf(w.at("w_e"), "weights.w_e");
    }

    if (j.contains("analysis")) {
      const json& a = j.at("analysis");
      cfg.analysis.xi_grid.box = parse_box(need(a, "xi_box", "analysis"), "analysis.xi_box");
      cfg.analysis.xi_grid.res = as_int_list(need(a, "xi_res", "analysis"), "analysis.xi_res");
      cfg.analysis.w_box = parse_box(need(a, "w_box", "analysis"), "analysis.w_box");
      cfg.analysis.w_points = as_int_list(need(a, "w_points", "analysis"), "analysis.w_points");
      cfg.analysis.r_points = as_int_list(need(a, "r_points", "analysis"), "analysis.r_points");
      cfg.analysis.alphas = as_num_list(need(a, "alphas", "analysis"), "analysis.alphas");
      if (a.contains("margin")) cfg.analysis.margin = as_num(a.at("margin"), "analysis.margin");
      if (cfg.analysis.xi_grid.box.size() != cfg.analysis.xi_grid.res.size())
        throw ConfigError("config: analysis.xi_box and analysis.xi_res disagree in dimension");
      for (int r : cfg.analysis.xi_grid.res)
        if (r < 1) throw ConfigError("config: analysis.xi_res entries must be >= 1");
    }

    if (j.contains("sim")) {
      const json& s = j.at("sim");
      if (s.contains("horizon")) cfg.sim.horizon = as_num(s.at("horizon"), "sim.horizon");
      if (s.contains("atol")) cfg.sim.atol = as_num(s.at("atol"), "sim.atol");
      if (s.contains("rtol")) cfg.sim.rtol = as_num(s.at("rtol"), "sim.rtol");
      if (s.contains("dt_out")) cfg.sim.dt_out = as_num(s.at("dt_out"), "sim.dt_out");
      if (s.contains("reference")) cfg.sim.reference = as_num(s.at("reference"), "sim.reference");
      if (s.contains("disturbances"))
        cfg.sim.disturbances = as_num_list(s.at("disturbances"), "sim.disturbances");
      if (!(cfg.sim.horizon > 0) || !(cfg.sim.atol > 0) || !(cfg.sim.rtol > 0) ||
          !(cfg.sim.dt_out > 0))
        throw ConfigError("config: sim horizon and tolerances must be positive");
    }

    if (j.contains("freq")) {
      const json& f = j.at("freq");
      if (f.contains("omega_min")) cfg.freq.omega_min = as_num(f.at("omega_min"), "freq.omega_min");
      if (f.contains("omega_max")) cfg.freq.omega_max = as_num(f.at("omega_max"), "freq.omega_max");
      if (f.contains("n_points")) cfg.freq.n_points = as_int(f.at("n_points"), "freq.n_points");
      if (f.contains("rho_values"))
        cfg.freq.rho_values = as_num_list(f.at("rho_values"), "freq.rho_values");
      if (!(cfg.freq.omega_min > 0) || !(cfg.freq.omega_max > cfg.freq.omega_min) ||
          cfg.freq.n_points < 2)
        throw ConfigError("config: freq grid must satisfy 0 < omega_min < omega_max, n >= 2");
    }

    // Construction preconditions are enforced at load time so commands can
    // assume a coherent model.
    cfg.plant.validate();
    cfg.controller.validate();
    cfg.scheduling.validate();
    cfg.w_r.validate();
    cfg.w_d.validate();
    cfg.w_e.validate();
    cfg.nonlinear();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return cfg;
}

RunReport cmd_stability(const ExperimentConfig& cfg, const CmdOptions& opts) {
  RunReport rep;
  rep.command = "stability";
  rep.config_hash = cfg.hash;
  fs::path dir = prep_out_dir(opts);
  auto clp = opts.weighted ? cfg.weighted_closed_loop() : cfg.closed_loop();
  auto verts = lpvmodel::vertices(clp.sys.P);

  json out;
  out["weighted"] = opts.weighted;
  auto vertex_entries = [&](const SymMatrix& x, double& worst) {
    json arr = json::array();
    worst = -std::numeric_limits<double>::infinity();
    for (const auto& v : verts) {
      auto e = matlib::sym_eig(analysis::Q_of(v, x, clp));
      worst = std::max(worst, e.values.back());
      json entry;
      entry["rho"] = v;
      entry["max_eig_lyap"] = e.values.back();
      arr.push_back(std::move(entry));
    }
    return arr;
  };

  if (!opts.verify_x_path.empty()) {
    SymMatrix x = read_x_file(opts.verify_x_path, clp.sys.n_x);
    double lmin = matlib::sym_eig(x).values.front();
    double worst = 0.0;
    json arr = vertex_entries(x, worst);
    bool ok = lmin > 0.0 && worst < 0.0;
    out["mode"] = "verify";
    out["X"] = mat_to_json(x.full());
    out["lambda_min_X"] = lmin;
    out["vertices"] = std::move(arr);
    out["valid"] = ok;
    char buf[160];
    std::snprintf(buf, sizeof buf,
                  "certificate %s: lambda_min(X) = %.6g, worst vertex eig = %.6g",
                  ok ? "valid" : "invalid", lmin, worst);
    rep.summary = buf;
    rep.exit_code = ok ? 0 : 2;
  } else {
    auto res = analysis::quadratic_stability(clp);
    out["mode"] = "solve";
    out["status"] = status_str(res.status);
    if (res.status == sdp::Status::Feasible) {
      double worst = 0.0;
      json arr = vertex_entries(res.lyap.X, worst);
      out["X"] = mat_to_json(res.lyap.X.full());
      out["lambda_min_X"] = matlib::sym_eig(res.lyap.X).values.front();
      out["vertices"] = std::move(arr);
      out["margin"] = res.margin;
      char buf[120];
      std::snprintf(buf, sizeof buf, "Feasible: min vertex margin %.6g", res.margin);
      rep.summary = buf;
      rep.exit_code = 0;
    } else {
      rep.summary = status_str(res.status);
      rep.exit_code = res.status == sdp::Status::Infeasible ? 2 : 3;
    }
  }
  write_json(dir / "stability.json", out);
  rep.output_paths = {"stability.json"};
  write_report(rep, dir);
  return rep;
}

RunReport cmd_l2gain(const ExperimentConfig& cfg, const CmdOptions& opts) {
  RunReport rep;
  rep.command = "l2gain";
  rep.config_hash = cfg.hash;
  fs::path dir = prep_out_dir(opts);
  auto clp = opts.weighted ? cfg.weighted_closed_loop() : cfg.closed_loop();
  auto res = analysis::l2gain(clp);

  json out;
  out["weighted"] = opts.weighted;
  out["status"] = status_str(res.status);
  bool ok = res.status == sdp::Status::Optimal || res.status == sdp::Status::Feasible;
  if (ok) {
    out["gamma"] = res.gamma;
    out["X"] = mat_to_json(res.lyap.X.full());
    out["rel_gap"] = res.solution.rel_gap;
    out["iterations"] = res.solution.iterations;
    char buf[120];
    std::snprintf(buf, sizeof buf, "gamma = %.6f (%s)", res.gamma,
                  status_str(res.status).c_str());
    rep.summary = buf;
    rep.exit_code = 0;
  } else {
    rep.summary = status_str(res.status);
    rep.exit_code = res.status == sdp::Status::Infeasible ? 2 : 3;
  }
  write_json(dir / "l2gain.json", out);
  rep.output_paths = {"l2gain.json"};
  write_report(rep, dir);
  return rep;
}

RunReport cmd_simulate(const ExperimentConfig& cfg, const CmdOptions& opts) {
  RunReport rep;
  rep.command = "simulate";
  rep.config_hash = cfg.hash;
  fs::path dir = prep_out_dir(opts);
  auto nl = cfg.nonlinear();
  const auto& sys = nl.clp.sys;
  if (sys.n_w != 2)
    throw ConfigError("simulate: the reference/disturbance protocol expects 2 exogenous inputs");

  sim::SimOptions so{cfg.sim.atol, cfg.sim.rtol, cfg.sim.dt_out};
  std::vector<double> ds = cfg.sim.disturbances;
  if (ds.empty()) ds.push_back(0.0);
  std::vector<double> xi0(sys.n_x, 0.0);

  json runs = json::array();
  std::vector<Series> series;
  bool any_violation = false;
  int n_converged = 0, n_cycle = 0, n_diverged = 0, n_violation = 0;

  for (size_t i = 0; i < ds.size(); ++i) {
    std::vector<double> w{cfg.sim.reference, ds[i]};
    auto traj = sim::integrate(nl, xi0, sim::InputSignal::constant(w), cfg.sim.horizon, so);
    auto verdict = sim::classify(traj, {}, sys.P);
    auto sched = sim::scheduling_in_set(traj, sys.P);
    if (!sched.inside) any_violation = true;
    switch (verdict.kind) {
      case sim::VerdictKind::Converged: ++n_converged; break;
      case sim::VerdictKind::LimitCycle: ++n_cycle; break;
      case sim::VerdictKind::Diverged: ++n_diverged; break;
      case sim::VerdictKind::SchedulingViolation: ++n_violation; break;
    }

    std::string name = "traj_" + std::to_string(i) + ".csv";
    std::ostringstream csv;
    csv << "t";
    for (int s = 0; s < sys.n_x; ++s) csv << ",xi_" << s + 1;
    for (int s = 0; s < sys.n_z; ++s) csv << ",z_" << s + 1;
    for (int s = 0; s < sys.n_rho; ++s) csv << ",rho_" << s + 1;
    csv << "\n";
    for (size_t k = 0; k < traj.times.size(); ++k) {
      csv << num12(traj.times[k]);
      for (double v : traj.states[k]) csv << "," << num12(v);
      for (double v : traj.outputs[k]) csv << "," << num12(v);
      for (double v : traj.scheduling[k]) csv << "," << num12(v);
      csv << "\n";
    }
    write_text(dir / name, csv.str());
    rep.output_paths.push_back(name);

    json entry;
    entry["reference"] = cfg.sim.reference;
    entry["disturbance"] = ds[i];
    entry["verdict"] = sim::to_string(verdict.kind);
    entry["steady_state_error"] = verdict.steady_state_error;
    entry["peak_to_peak"] = verdict.peak_to_peak;
    entry["period_estimate"] = verdict.period_estimate;
    entry["low_confidence"] = verdict.low_confidence;
    entry["scheduling_inside"] = sched.inside;
    if (!sched.inside) entry["first_violation_time"] = sched.first_violation_time;
    entry["aborted"] = traj.aborted;
    entry["csv"] = name;
    runs.push_back(std::move(entry));

    if (sys.n_z >= 1) {
      Series s;
      s.label = "d=" + num12(ds[i]);
      s.color = kPalette[i % kPaletteSize];
      for (size_t k = 0; k < traj.times.size(); k += 10)
        s.pts.emplace_back(traj.times[k], traj.outputs[k][0]);
      series.push_back(std::move(s));
    }
  }

  json out;
  out["runs"] = std::move(runs);
  out["all_scheduling_inside"] = !any_violation;
  write_json(dir / "verdicts.json", out);
  rep.output_paths.push_back("verdicts.json");
  if (!series.empty()) {
    write_text(dir / "sim.svg",
               svg_line_plot("closed-loop error responses", "t [s]", "z_1", series));
    rep.output_paths.push_back("sim.svg");
  }

  char buf[200];
  std::snprintf(buf, sizeof buf,
                "%zu runs: %d Converged, %d LimitCycle, %d Diverged, %d SchedulingViolation",
                ds.size(), n_converged, n_cycle, n_diverged, n_violation);
  rep.summary = buf;
  rep.exit_code = (any_violation || n_violation > 0) ? 2 : 0;
  write_report(rep, dir);
  return rep;
}

RunReport cmd_sets(const ExperimentConfig& cfg, const CmdOptions& opts) {
  RunReport rep;
  rep.command = "sets";
  rep.config_hash = cfg.hash;
  fs::path dir = prep_out_dir(opts);
  if (cfg.analysis.xi_grid.box.empty() || cfg.analysis.w_box.empty())
    throw ConfigError("sets: the config has no analysis section");
  auto clp = cfg.closed_loop();
  auto nl = cfg.nonlinear();

  std::vector<double> alphas = opts.alphas ? *opts.alphas : cfg.analysis.alphas;
  if (alphas.empty()) throw ConfigError("sets: no alpha values given");
  for (double a : alphas)
    if (!(a >= 0.0 && a <= 1.0)) throw ConfigError("sets: alpha values must lie in [0, 1]");

  // Lyapunov certificate for the decrease sets: the gain-bound storage matrix.
  auto gain = analysis::l2gain(clp);
  if (gain.status != sdp::Status::Optimal && gain.status != sdp::Status::Feasible) {
    rep.summary = "no Lyapunov certificate: " + status_str(gain.status);
    rep.exit_code = gain.status == sdp::Status::Infeasible ? 2 : 3;
    write_report(rep, dir);
    return rep;
  }

  analysis::SweepConfig sc;
  sc.w_box = cfg.analysis.w_box;
  sc.w_points = cfg.analysis.w_points;
  sc.r_points = cfg.analysis.r_points;
  sc.xi_grid = cfg.analysis.xi_grid;
  sc.margin = opts.margin ? *opts.margin : cfg.analysis.margin;

  json cert;
  cert["gamma"] = gain.gamma;
  cert["status"] = status_str(gain.status);
  cert["X"] = mat_to_json(gain.lyap.X.full());
  cert["margin_option"] = sc.margin;

  std::ostringstream table;
  table << "alpha,s_hat_cells,xi_bar_cells,r_cells,r_subset_of_s_hat,violation_cells\n";
  json rows = json::array();
  int n_pass = 0;
  double largest_pass = -1.0;
  const bool plot2d = sc.xi_grid.res.size() == 2;

  for (size_t i = 0; i < alphas.size(); ++i) {
    auto sets = analysis::alpha_slice(alphas[i], sc, gain.lyap.X, nl);
    const auto& row = sets.row;
    table << num12(row.alpha) << "," << row.s_hat_cells << "," << row.xi_bar_cells << ","
          << row.r_cells << "," << (row.r_subset_of_s_hat ? "true" : "false") << ","
          << row.violation_cells << "\n";
    json jr;
    jr["alpha"] = row.alpha;
    jr["s_hat_cells"] = row.s_hat_cells;
    jr["xi_bar_cells"] = row.xi_bar_cells;
    jr["r_cells"] = row.r_cells;
    jr["r_subset_of_s_hat"] = row.r_subset_of_s_hat;
    jr["violation_cells"] = row.violation_cells;
    rows.push_back(std::move(jr));
    if (row.r_subset_of_s_hat) {
      ++n_pass;
      largest_pass = std::max(largest_pass, row.alpha);
    }

    // per-alpha masks, row-major over axis 0; each string is one axis-0 slice
    auto mask_lines = [&](const analysis::GridSet& s) {
      json lines = json::array();
      const auto& res = s.grid.res;
      long inner = 1;
      for (size_t k = 1; k < res.size(); ++k) inner *= res[k];
      for (long r = 0; r < res[0]; ++r) {
        std::string line(inner, '0');
        for (long c = 0; c < inner; ++c)
          if (s.mask[r * inner + c]) line[c] = '1';
        lines.push_back(std::move(line));
      }
      return lines;
    };
    json jm;
    jm["alpha"] = row.alpha;
    jm["box"] = json::array();
    for (const auto& ax : sc.xi_grid.box) jm["box"].push_back(json::array({ax[0], ax[1]}));
    jm["res"] = sc.xi_grid.res;
    jm["s_hat"] = mask_lines(sets.s_hat);
    jm["xi_bar"] = mask_lines(sets.xi_bar);
    jm["r"] = mask_lines(sets.r);
    std::string mask_name = "sets_alpha_" + std::to_string(i) + ".json";
    write_json(dir / mask_name, jm);
    rep.output_paths.push_back(mask_name);

    if (plot2d) {
      std::string svg_name = "sets_alpha_" + std::to_string(i) + ".svg";
      write_text(dir / svg_name,
                 svg_heatmap("state-space sets, alpha = " + num12(row.alpha), sets.s_hat,
                             sets.xi_bar, sets.r));
      rep.output_paths.push_back(svg_name);
    }
  }

  write_text(dir / "alpha_table.csv", table.str());
  rep.output_paths.insert(rep.output_paths.begin(), "alpha_table.csv");
  json out;
  out["certificate"] = std::move(cert);
  out["table"] = std::move(rows);
  write_json(dir / "sets.json", out);
  rep.output_paths.push_back("sets.json");

  char buf[160];
  if (largest_pass >= 0.0)
    std::snprintf(buf, sizeof buf, "reach set within decrease set for %d/%zu alphas (largest %.3g)",
                  n_pass, alphas.size(), largest_pass);
  else
    std::snprintf(buf, sizeof buf, "reach set within decrease set for 0/%zu alphas",
                  alphas.size());
  rep.summary = buf;
  rep.exit_code = 0;
  write_report(rep, dir);
  return rep;
}

RunReport cmd_bode(const ExperimentConfig& cfg, const CmdOptions& opts) {
  RunReport rep;
  rep.command = "bode";
  rep.config_hash = cfg.hash;
  fs::path dir = prep_out_dir(opts);
  auto clp = cfg.closed_loop();
  const auto& sys = clp.sys;
  if (sys.n_rho != 1) throw ConfigError("bode: only scalar scheduling is supported");
  if (sys.n_w < 2 || sys.n_z < 1)
    throw ConfigError("bode: the model must expose (reference, disturbance) inputs and an error output");

  std::vector<double> rhos = cfg.freq.rho_values;
  if (rhos.empty()) {
    for (int i = 0; i < 10; ++i)
      rhos.push_back(sys.P[0][0] + (sys.P[0][1] - sys.P[0][0]) * i / 9.0);
  }
  auto omegas = freq::log_grid(cfg.freq.omega_min, cfg.freq.omega_max, cfg.freq.n_points);

  struct Channel {
    const char* name;
    int input;
  };
  const Channel channels[] = {{"S", 0}, {"PS", 1}};

  std::ostringstream csv;
  csv << "omega_rad_s,rho,channel,magnitude_db\n";
  std::vector<Series> svg_series[2];
  for (const auto& ch : channels) {
    for (size_t r = 0; r < rhos.size(); ++r) {
      auto lti = freq::freeze(clp, {rhos[r]});
      auto mags = freq::magnitude_response(lti, ch.input, 0, omegas);
      Series s;
      s.label = std::string("rho=") + num12(rhos[r]);
      s.color = kPalette[r % kPaletteSize];
      for (size_t k = 0; k < omegas.size(); ++k) {
        double db = mags[k] ? *mags[k] : std::numeric_limits<double>::quiet_NaN();
        csv << num12(omegas[k]) << "," << num12(rhos[r]) << "," << ch.name << "," << num12(db)
            << "\n";
        s.pts.emplace_back(std::log10(omegas[k]), db);
      }
      svg_series[&ch - channels].push_back(std::move(s));
    }
  }
  // shaping bounds: reciprocal magnitude of the weight chain per channel
  const lpvmodel::TransferFunction* in_weight[2] = {&cfg.w_r, &cfg.w_d};
  for (int c = 0; c < 2; ++c) {
    Series s;
    s.label = c == 0 ? "1/(|W_e W_r|)" : "1/(|W_e W_d|)";
    s.color = "#000000";
    for (double wv : omegas) {
      double mag = std::abs(cfg.w_e.eval(wv)) * std::abs(in_weight[c]->eval(wv));
      double db = -20.0 * std::log10(mag);
      csv << num12(wv) << "," << num12(-1.0) << ","
          << (c == 0 ? "inv_We_Wr" : "inv_We_Wd") << "," << num12(db) << "\n";
      s.pts.emplace_back(std::log10(wv), db);
    }
    svg_series[c].push_back(std::move(s));
  }

  write_text(dir / "bode.csv", csv.str());
  rep.output_paths.push_back("bode.csv");
  write_text(dir / "bode_S.svg",
             svg_line_plot("frozen sensitivity magnitude", "log10(omega [rad/s])",
                           "magnitude [dB]", svg_series[0]));
  rep.output_paths.push_back("bode_S.svg");
  write_text(dir / "bode_PS.svg",
             svg_line_plot("frozen process-sensitivity magnitude", "log10(omega [rad/s])",
                           "magnitude [dB]", svg_series[1]));
  rep.output_paths.push_back("bode_PS.svg");

  char buf[120];
  std::snprintf(buf, sizeof buf, "channels S, PS at %zu frozen scheduling values, %d points",
                rhos.size(), cfg.freq.n_points);
  rep.summary = buf;
  rep.exit_code = 0;
  write_report(rep, dir);
  return rep;
}

bool validate_report_file(const std::string& path, const std::string& command) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const std::exception&) {
    return false;
  }
  if (!j.is_object()) return false;
  for (const char* key : {"command", "config_hash", "summary"})
    if (!j.contains(key) || !j.at(key).is_string()) return false;
  if (!j.contains("exit_code") || !j.at("exit_code").is_number_integer()) return false;
  if (!j.contains("outputs") || !j.at("outputs").is_array()) return false;
  if (j.at("command").get<std::string>() != command) return false;
  const std::string hash = j.at("config_hash").get<std::string>();
  if (hash.size() != 16 || hash.find_first_not_of("0123456789abcdef") != std::string::npos)
    return false;
  fs::path base = fs::path(path).parent_path();
  if (j.at("exit_code").get<int>() == 0) {
    for (const auto& o : j.at("outputs")) {
      if (!o.is_string()) return false;
      if (!fs::exists(base / o.get<std::string>())) return false;
    }
  }
  return true;
}

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"LPV closed-loop analysis: stability, L2 gain, simulation, sets, bode"};
  app.require_subcommand(1);

  std::string config_path;
  CmdOptions opts;
  double margin_val = 0.0;
  std::vector<double> alpha_vals;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "experiment config (JSON)")->required();
    cmd->add_option("--out", opts.out_dir, "output directory (default: out)");
  };
  CLI::App* c_stab = app.add_subcommand("stability", "quadratic stability certificate");
  add_common(c_stab);
  c_stab->add_flag("--weighted", opts.weighted, "analyze the weighted loop");
  c_stab->add_option("--verify-x", opts.verify_x_path,
                     "verify a Lyapunov matrix from a JSON file instead of solving");
  CLI::App* c_gain = app.add_subcommand("l2gain", "L2-gain bound with certificate");
  add_common(c_gain);
  c_gain->add_flag("--weighted", opts.weighted, "analyze the weighted loop");
  CLI::App* c_sim = app.add_subcommand("simulate", "closed-loop time responses and verdicts");
  add_common(c_sim);
  CLI::App* c_sets = app.add_subcommand("sets", "decrease/equilibrium/reach sets over alpha");
  add_common(c_sets);
  CLI::Option* o_margin =
      c_sets->add_option("--margin", margin_val, "require vdot < -margin for the decrease sets");
  CLI::Option* o_alphas =
      c_sets->add_option("--alphas", alpha_vals, "comma-separated alpha list override")
          ->delimiter(',');
  CLI::App* c_bode = app.add_subcommand("bode", "frozen-scheduling magnitude responses");
  add_common(c_bode);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }
  if (o_margin->count() > 0) opts.margin = margin_val;
  if (o_alphas->count() > 0) opts.alphas = alpha_vals;

  try {
    ExperimentConfig cfg = load_config(config_path);
    auto t0 = std::chrono::steady_clock::now();
    RunReport rep;
    if (c_stab->parsed()) rep = cmd_stability(cfg, opts);
    else if (c_gain->parsed()) rep = cmd_l2gain(cfg, opts);
    else if (c_sim->parsed()) rep = cmd_simulate(cfg, opts);
    else if (c_sets->parsed()) rep = cmd_sets(cfg, opts);
    else rep = cmd_bode(cfg, opts);
    rep.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%s: %s\n", rep.command.c_str(), rep.summary.c_str());
    std::printf("config %s, outputs in %s, wall time %.3f s\n", rep.config_hash.c_str(),
                opts.out_dir.c_str(), rep.wall_time_s);
    return rep.exit_code;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 1;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
}

}  // namespace lpvlab::cli
