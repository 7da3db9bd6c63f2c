#include "hmpc/logging.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace hmpc {

namespace {

void append_num(std::string& out, double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  out += buf;
}

const char* axis_labels[6] = {"ep_x", "ep_y", "ep_z", "eo_x", "eo_y", "eo_z"};

std::string status_field(const CycleRecord& rec) {
  std::string s;
  if (rec.fallback == 1) s += "hold:";
  if (rec.fallback == 2) s += "zero:";
  s += to_string(rec.qp_status);
  return s;
}

}  // namespace

std::string log_csv_header(int n_joints) {
  std::string h = "t";
  auto per_joint = [&](const char* prefix) {
    for (int i = 0; i < n_joints; ++i) {
      h += ",";
      h += prefix;
      h += "_" + std::to_string(i);
    }
  };
  per_joint("q");
  per_joint("qd");
  per_joint("u_qd");
  per_joint("u_qdd");
  h += ",p_x,p_y,p_z,o_w,o_x,o_y,o_z";
  h += ",pref_x,pref_y,pref_z,oref_w,oref_x,oref_y,oref_z";
  h += ",ep_x,ep_y,ep_z,eo_x,eo_y,eo_z";
  h += ",qp_status,solve_time_us";
  return h;
}

std::string log_csv(const ExecutionLog& log, bool include_timing) {
  const int nj = log.scenario.chain.dof();
  std::string out = log_csv_header(nj);
  out += "\n";
  for (const auto& rec : log.cycles) {
    append_num(out, rec.t);
    auto push_vec = [&](const auto& v) {
      for (int i = 0; i < v.size(); ++i) {
        out += ",";
        append_num(out, v(i));
      }
    };
    push_vec(rec.q);
    push_vec(rec.qd);
    push_vec(rec.u.head(nj));
    push_vec(rec.u.tail(nj));
    push_vec(rec.x.p);
    push_vec(rec.x.o);
    push_vec(rec.x_ref.p);
    push_vec(rec.x_ref.o);
    push_vec(rec.e_p);
    push_vec(rec.e_o);
    out += ",";
    out += status_field(rec);
    out += ",";
    const long long us =
        include_timing ? std::llround(rec.solve_time * 1e6) : 0;
    out += std::to_string(us);
    out += "\n";
  }
  return out;
}

std::string summary_csv(const ExecutionLog& log) {
  const Eigen::MatrixXd E = tracking_errors(log);
  std::string out =
      "axis,median,q1,q3,iqr,whisker_lo,whisker_hi,outliers,max\n";
  for (int a = 0; a < 6; ++a) {
    const Eigen::VectorXd col = E.col(a);
    const ErrorSummary s = summarize({col.data(), static_cast<size_t>(col.size())});
    out += axis_labels[a];
    for (double v : {s.median, s.q1, s.q3, s.iqr, s.whisker_lo, s.whisker_hi}) {
      out += ",";
      append_num(out, v);
    }
    out += "," + std::to_string(s.outliers) + ",";
    append_num(out, s.max);
    out += "\n";
  }
  return out;
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) {
    throw std::runtime_error("cannot open for writing: " + path);
  }
  f << content;
  if (!f) {
    throw std::runtime_error("write failed: " + path);
  }
}

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) {
    throw std::runtime_error("cannot open for reading: " + path);
  }
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

}  // namespace hmpc
