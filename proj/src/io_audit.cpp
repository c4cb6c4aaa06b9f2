#include "locklab/io_audit.hpp"

#include <fstream>
#include <sstream>

#include "locklab/netlist.hpp"

namespace locklab {

AccessLog& AccessLog::instance() {
  static AccessLog log;
  return log;
}

void AccessLog::record(const std::string& path, const std::string& mode) {
  std::lock_guard<std::mutex> lock(mu_);
  entries_.push_back({path, mode, stage_});
}

std::vector<FileAccess> AccessLog::snapshot() const {
  std::lock_guard<std::mutex> lock(mu_);
  return entries_;
}

void AccessLog::clear() {
  std::lock_guard<std::mutex> lock(mu_);
  entries_.clear();
}

void AccessLog::set_stage(std::string stage) {
  std::lock_guard<std::mutex> lock(mu_);
  stage_ = std::move(stage);
}

std::string AccessLog::stage() const {
  std::lock_guard<std::mutex> lock(mu_);
  return stage_;
}

StageScope::StageScope(std::string stage)
    : prev_(AccessLog::instance().stage()) {
  AccessLog::instance().set_stage(std::move(stage));
}

StageScope::~StageScope() { AccessLog::instance().set_stage(prev_); }

std::string slurp(const std::string& path) {
  AccessLog::instance().record(path, "read");
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NetlistError("cannot open '" + path + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spew(const std::string& path, const std::string& content) {
  AccessLog::instance().record(path, "write");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw NetlistError("cannot open '" + path + "' for writing");
  out << content;
  if (!out) throw NetlistError("write to '" + path + "' failed");
}

}  // namespace locklab
