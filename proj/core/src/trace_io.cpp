#include "perdl/trace_io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace perdl {

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_round_trace_csv(const std::string& path,
                           const std::vector<RoundTrace>& rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << "round,client_id,global_err,local_err,recon_residual,wall_ms\n";
  for (const auto& row : rows) {
    out << row.round << ',' << row.client_id << ',' << format_double(row.global_err)
        << ',' << format_double(row.local_err) << ','
        << format_double(row.recon_residual) << ',' << format_double(row.wall_ms)
        << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

void write_message_log_jsonl(const std::string& path,
                             const std::vector<MessageRecord>& records) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  for (const auto& rec : records) {
    out << "{\"round\":" << rec.round << ",\"direction\":\""
        << (rec.direction == Direction::kClientToServer ? "client_to_server"
                                                        : "server_to_client")
        << "\",\"client_id\":" << rec.client_id << ",\"payload_shape\":["
        << rec.rows << ',' << rec.cols << "],\"kind\":\"" << rec.kind
        << "\"}\n";
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace perdl
