#include "qchunk/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "qchunk/rng.hpp"

namespace qchunk {

double temporal_coherency(const Trace& trace) {
  if (trace.positions.size() < 2)
    throw std::invalid_argument("temporal_coherency needs >= 2 positions");
  double sum = 0.0;
  for (std::size_t i = 0; i + 1 < trace.positions.size(); ++i)
    sum += (trace.positions[i + 1] - trace.positions[i]).norm();
  return sum / static_cast<double>(trace.positions.size() - 1);
}

long state_coverage(const Trace& trace, int grid_resolution) {
  if (grid_resolution <= 0)
    throw std::invalid_argument("grid_resolution must be positive");
  std::set<std::vector<int>> cells;
  for (const Vector& p : trace.positions) {
    std::vector<int> cell(p.size());
    for (Eigen::Index d = 0; d < p.size(); ++d) {
      int c = static_cast<int>(std::floor((p[d] + 1.0) * 0.5 *
                                          grid_resolution));
      cell[d] = std::clamp(c, 0, grid_resolution - 1);
    }
    cells.insert(std::move(cell));
  }
  return static_cast<long>(cells.size());
}

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

}  // namespace

void emit_csv(const RunLog& log, const std::string& path) {
  std::ofstream f(path, std::ios::binary);  // binary keeps \n on all hosts
  if (!f) throw std::runtime_error("cannot write csv: " + path);
  f << "step,phase,success_rate,mean_return,critic_loss,flow_loss,"
       "actor_loss,coherency\n";
  for (const LogRow& r : log.rows) {
    f << r.step << ',' << r.phase << ',' << fmt(r.success_rate) << ','
      << fmt(r.mean_return) << ',' << fmt(r.critic_loss) << ','
      << fmt(r.flow_loss) << ',' << fmt(r.actor_loss) << ','
      << fmt(r.coherency) << '\n';
  }
  if (!f) throw std::runtime_error("csv write failed: " + path);
}

RunLog parse_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open csv: " + path);
  std::string line;
  if (!std::getline(f, line))
    throw std::runtime_error("empty csv: " + path);
  RunLog log;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string field;
    LogRow r;
    std::getline(ss, field, ',');
    r.step = std::stol(field);
    std::getline(ss, r.phase, ',');
    double* nums[6] = {&r.success_rate, &r.mean_return, &r.critic_loss,
                       &r.flow_loss,    &r.actor_loss,  &r.coherency};
    for (double* dst : nums) {
      if (!std::getline(ss, field, ','))
        throw std::runtime_error("malformed csv row: " + line);
      *dst = std::stod(field);
    }
    log.rows.push_back(std::move(r));
  }
  return log;
}

void emit_plot_svg(const std::vector<Series>& series,
                   const std::string& path) {
  static const char* kColors[] = {"#CB297B", "#0076BA", "#66509B", "#2E7D32",
                                  "#E65100", "#455A64"};
  const double width = 800, height = 500;
  const double ml = 60, mr = 20, mt = 20, mb = 45;  // margins

  double xmin = 0, xmax = 1, ymin = 0, ymax = 1;
  bool first = true;
  for (const Series& s : series)
    for (const auto& [x, y] : s.second) {
      if (first) {
        xmin = xmax = x;
        ymin = ymax = y;
        first = false;
      }
      xmin = std::min(xmin, x);
      xmax = std::max(xmax, x);
      ymin = std::min(ymin, y);
      ymax = std::max(ymax, y);
    }
  if (xmax - xmin < 1e-12) xmax = xmin + 1.0;
  if (ymax - ymin < 1e-12) ymax = ymin + 1.0;

  const auto px = [&](double x) {
    return ml + (x - xmin) / (xmax - xmin) * (width - ml - mr);
  };
  const auto py = [&](double y) {
    return height - mb - (y - ymin) / (ymax - ymin) * (height - mt - mb);
  };

  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write svg: " + path);
  f << "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 800 500\" "
       "width=\"800\" height=\"500\">\n";
  f << "<rect width=\"800\" height=\"500\" fill=\"white\"/>\n";
  // axes
  f << "<line x1=\"" << fmt(ml) << "\" y1=\"" << fmt(height - mb)
    << "\" x2=\"" << fmt(width - mr) << "\" y2=\"" << fmt(height - mb)
    << "\" stroke=\"black\"/>\n";
  f << "<line x1=\"" << fmt(ml) << "\" y1=\"" << fmt(mt) << "\" x2=\""
    << fmt(ml) << "\" y2=\"" << fmt(height - mb)
    << "\" stroke=\"black\"/>\n";
  // ticks
  for (int i = 0; i <= 4; ++i) {
    const double tx = xmin + (xmax - xmin) * i / 4.0;
    const double ty = ymin + (ymax - ymin) * i / 4.0;
    f << "<text x=\"" << fmt(px(tx)) << "\" y=\"" << fmt(height - mb + 18)
      << "\" font-size=\"11\" text-anchor=\"middle\">" << fmt(tx)
      << "</text>\n";
    f << "<text x=\"" << fmt(ml - 6) << "\" y=\"" << fmt(py(ty) + 4)
      << "\" font-size=\"11\" text-anchor=\"end\">" << fmt(ty)
      << "</text>\n";
  }
  // series
  int ci = 0;
  for (const Series& s : series) {
    const char* color = kColors[ci % 6];
    if (s.second.size() == 1) {
      f << "<circle cx=\"" << fmt(px(s.second[0].first)) << "\" cy=\""
        << fmt(py(s.second[0].second)) << "\" r=\"3\" fill=\"" << color
        << "\"/>\n";
    } else if (!s.second.empty()) {
      f << "<polyline fill=\"none\" stroke=\"" << color
        << "\" stroke-width=\"1.5\" points=\"";
      for (const auto& [x, y] : s.second)
        f << fmt(px(x)) << ',' << fmt(py(y)) << ' ';
      f << "\"/>\n";
    }
    // legend entry
    const double ly = mt + 16.0 * ci;
    f << "<rect x=\"" << fmt(width - mr - 130) << "\" y=\"" << fmt(ly)
      << "\" width=\"12\" height=\"4\" fill=\"" << color << "\"/>\n";
    f << "<text x=\"" << fmt(width - mr - 112) << "\" y=\"" << fmt(ly + 6)
      << "\" font-size=\"11\">" << s.first << "</text>\n";
    ++ci;
  }
  f << "</svg>\n";
  if (!f) throw std::runtime_error("svg write failed: " + path);
}

EvalResult evaluate(RolloutPolicy& policy, const EnvSpec& spec, int episodes,
                    std::uint64_t seed, int stride) {
  if (episodes < 1)
    throw std::invalid_argument("evaluate: episodes must be >= 1");
  EvalResult res;
  res.trace.stride = stride;
  auto env = make_env(spec);
  long successes = 0;
  double total_return = 0.0;
  for (int ep = 0; ep < episodes; ++ep) {
    Vector obs = env->reset(derive_seed(seed, 0xE0000 + ep));
    policy.begin_episode(derive_seed(seed, 0xA0000 + ep));
    res.trace.positions.push_back(env->position());
    bool done = false;
    long step = 0;
    while (!done) {
      StepResult r = env->step(policy.act(obs));
      total_return += r.reward;
      obs = r.obs;
      ++step;
      if (step % stride == 0) res.trace.positions.push_back(env->position());
      if (r.terminal) ++successes;
      done = r.terminal || r.truncated;
    }
  }
  res.success_rate = static_cast<double>(successes) / episodes;
  res.mean_return = total_return / episodes;
  return res;
}

double evaluate_success(RolloutPolicy& policy, const EnvSpec& spec,
                        int episodes, std::uint64_t seed) {
  return evaluate(policy, spec, episodes, seed).success_rate;
}

}  // namespace qchunk
