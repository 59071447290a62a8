#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "biasbench/llm_gateway.hpp"

namespace testutil {

inline std::filesystem::path repo_dir() { return BIASBENCH_REPO_DIR; }

inline std::filesystem::path templates_dir() { return repo_dir() / "templates"; }

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

inline void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << content;
}

// Self-deleting unique directory under the system temp dir.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<unsigned> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("biasbench_" + tag + "_" + std::to_string(::getpid()) + "_" +
             std::to_string(counter.fetch_add(1)));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

class FakeClock : public biasbench::Clock {
 public:
  std::uint64_t now_ms() override {
    std::lock_guard<std::mutex> lock(mu_);
    return now_;
  }
  void sleep_ms(std::uint64_t ms) override {
    std::lock_guard<std::mutex> lock(mu_);
    now_ += ms;
  }

 private:
  std::mutex mu_;
  std::uint64_t now_ = 0;
};

inline std::string chat_completion_body(const std::string& content) {
  nlohmann::json body = {
      {"choices", {{{"message", {{"role", "assistant"}, {"content", content}}}}}}};
  return body.dump();
}

struct TransportLog {
  std::mutex mu;
  std::vector<std::string> bodies;
  std::vector<std::string> tokens;
  std::vector<std::string> urls;
  std::atomic<std::uint64_t> calls{0};
};

// Scripted HTTP stand-in: pops queued responses in order, then falls back to
// a repeating chat completion (or throws when no fallback was set).
class FakeTransport : public biasbench::HttpTransport {
 public:
  explicit FakeTransport(std::shared_ptr<TransportLog> log) : log_(std::move(log)) {}

  void push_status(int status, const std::string& body = "") {
    script_.push_back({status, body, false, ""});
  }
  void push_content(const std::string& content) {
    script_.push_back({200, chat_completion_body(content), false, ""});
  }
  void push_transport_error(const std::string& message) {
    script_.push_back({0, "", true, message});
  }
  void set_fallback_content(const std::string& content) {
    fallback_ = chat_completion_body(content);
  }

  biasbench::HttpResponse post_json(const std::string& base_url, const std::string& path,
                                    const std::string& bearer_token,
                                    const std::string& body) override {
    std::lock_guard<std::mutex> lock(log_->mu);
    log_->calls.fetch_add(1);
    log_->bodies.push_back(body);
    log_->tokens.push_back(bearer_token);
    log_->urls.push_back(base_url + path);
    if (next_ < script_.size()) return script_[next_++];
    if (!fallback_.empty()) return {200, fallback_, false, ""};
    throw std::runtime_error("FakeTransport script exhausted");
  }

 private:
  std::shared_ptr<TransportLog> log_;
  std::vector<biasbench::HttpResponse> script_;
  std::size_t next_ = 0;
  std::string fallback_;
};

// Balanced synthetic corpus: label alternates 0/1 by file position.
inline void write_synthetic_corpus(const std::filesystem::path& path, std::size_t n) {
  std::ostringstream out;
  for (std::size_t i = 0; i < n; ++i) {
    nlohmann::json record = {
        {"text", "Synthetic statement " + std::to_string(i) + " about topic " +
                     std::to_string(i % 7) + "."},
        {"label", static_cast<int>(i % 2)}};
    out << record.dump() << '\n';
  }
  write_file(path, out.str());
}

}  // namespace testutil
