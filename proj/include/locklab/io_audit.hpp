#pragma once

#include <mutex>
#include <string>
#include <vector>

namespace locklab {

// Every pipeline file touch is recorded with the stage it happened in, so
// tests can assert which stage opened what (the attack stage must never
// read labels or secrets of test instances).
struct FileAccess {
  std::string path;
  std::string mode;  // "read" or "write"
  std::string stage;
};

class AccessLog {
 public:
  static AccessLog& instance();
  void record(const std::string& path, const std::string& mode);
  std::vector<FileAccess> snapshot() const;
  void clear();
  void set_stage(std::string stage);
  std::string stage() const;

 private:
  mutable std::mutex mu_;
  std::vector<FileAccess> entries_;
  std::string stage_;
};

// Names the current pipeline stage for the log; restores the previous name
// when it goes out of scope.
class StageScope {
 public:
  explicit StageScope(std::string stage);
  ~StageScope();
  StageScope(const StageScope&) = delete;
  StageScope& operator=(const StageScope&) = delete;

 private:
  std::string prev_;
};

// Whole-file read/write through the access log. Throw on I/O failure.
std::string slurp(const std::string& path);
void spew(const std::string& path, const std::string& content);

}  // namespace locklab
