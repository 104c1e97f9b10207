// SPDX-License-Identifier: Apache-2.0
#include "homer/subprocess_oracle.hpp"

#include <fcntl.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstdlib>
#include <cstring>
#include <mutex>

#include "homer/error.hpp"
#include "homer/io.hpp"

namespace homer::oracles {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

class TempDir {
 public:
  TempDir() {
    std::string pattern = (fs::temp_directory_path() / "homer-oracle-XXXXXX").string();
    if (!::mkdtemp(pattern.data())) {
      fail(ErrorCode::io_error, std::string("mkdtemp failed: ") + std::strerror(errno));
    }
    path_ = pattern;
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

void ignore_sigpipe_once() {
  static std::once_flag flag;
  std::call_once(flag, [] { ::signal(SIGPIPE, SIG_IGN); });
}

struct ProcessOutput {
  int status = 0;
  std::string out;
};

ProcessOutput run_process(const std::string& command, const std::string& input) {
  ignore_sigpipe_once();
  int in_pipe[2], out_pipe[2];
  if (::pipe2(in_pipe, O_CLOEXEC) != 0) fail(ErrorCode::oracle_failure, "pipe failed");
  if (::pipe2(out_pipe, O_CLOEXEC) != 0) {
    ::close(in_pipe[0]);
    ::close(in_pipe[1]);
    fail(ErrorCode::oracle_failure, "pipe failed");
  }
  const pid_t pid = ::fork();
  if (pid < 0) {
    for (int fd : {in_pipe[0], in_pipe[1], out_pipe[0], out_pipe[1]}) ::close(fd);
    fail(ErrorCode::oracle_failure, "fork failed");
  }
  if (pid == 0) {
    ::dup2(in_pipe[0], STDIN_FILENO);
    ::dup2(out_pipe[1], STDOUT_FILENO);
    ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
    ::_exit(127);
  }
  ::close(in_pipe[0]);
  ::close(out_pipe[1]);
  std::size_t written = 0;
  while (written < input.size()) {
    const ssize_t n = ::write(in_pipe[1], input.data() + written, input.size() - written);
    if (n < 0) {
      if (errno == EINTR) continue;
      break;  // child stopped reading; its reply decides the outcome
    }
    written += static_cast<std::size_t>(n);
  }
  ::close(in_pipe[1]);
  ProcessOutput result;
  char buf[4096];
  for (;;) {
    const ssize_t n = ::read(out_pipe[0], buf, sizeof buf);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) break;
    result.out.append(buf, static_cast<std::size_t>(n));
  }
  ::close(out_pipe[0]);
  int status = 0;
  while (::waitpid(pid, &status, 0) < 0 && errno == EINTR) {
  }
  result.status = status;
  return result;
}

json points_json(std::span<const PixelPoint> pts) {
  json arr = json::array();
  for (const auto& p : pts) arr.push_back({p.x, p.y});
  return arr;
}

std::vector<PixelPoint> points_from_json(const json& arr) {
  std::vector<PixelPoint> out;
  for (const auto& p : arr) out.push_back({p.at(0).get<int>(), p.at(1).get<int>()});
  return out;
}

fs::path reply_path(const json& reply, const char* key, const std::string& command) {
  if (!reply.contains(key) || !reply[key].is_string()) {
    fail(ErrorCode::oracle_failure, "oracle '" + command + "' reply lacks " + key + ": " + reply.dump());
  }
  return reply[key].get<std::string>();
}

}  // namespace

json call_oracle_process(const std::string& command, const json& request) {
  const auto out = run_process(command, request.dump() + "\n");
  json reply;
  try {
    reply = json::parse(out.out);
  } catch (const json::exception&) {
    fail(ErrorCode::oracle_failure, "oracle '" + command + "' produced unparsable output: " + out.out);
  }
  if (!reply.is_object() || reply.value("status", std::string{}) != "ok") {
    fail(ErrorCode::oracle_failure, "oracle '" + command + "' failed: " + reply.dump());
  }
  if (!WIFEXITED(out.status) || WEXITSTATUS(out.status) != 0) {
    fail(ErrorCode::oracle_failure, "oracle '" + command + "' exited abnormally: " + reply.dump());
  }
  return reply;
}

BinaryMask SubprocessSegmenter::segment(const RgbImage& image, std::span<const PixelPoint> foreground,
                                        std::span<const PixelPoint> background) {
  TempDir dir;
  const auto image_path = dir.path() / "image.png";
  io::write_png(image_path, image);
  const json request = {{"op", "segment"},
                        {"image_path", image_path.string()},
                        {"fg_points", points_json(foreground)},
                        {"bg_points", points_json(background)}};
  const json reply = call_oracle_process(command_, request);
  return io::read_mask_png(reply_path(reply, "mask_path", command_));
}

RgbImage SubprocessInpainter::inpaint(const RgbImage& image, const BinaryMask& mask) {
  TempDir dir;
  const auto image_path = dir.path() / "image.png";
  const auto mask_path = dir.path() / "mask.png";
  io::write_png(image_path, image);
  io::write_mask_png(mask_path, mask);
  const json request = {{"op", "inpaint"}, {"image_path", image_path.string()}, {"mask_path", mask_path.string()}};
  const json reply = call_oracle_process(command_, request);
  return io::read_png(reply_path(reply, "image_path", command_));
}

MatchResult SubprocessMatcher::match(const RgbImage& a, const RgbImage& b, ViewPair pair) {
  TempDir dir;
  const auto a_path = dir.path() / "a.png";
  const auto b_path = dir.path() / "b.png";
  io::write_png(a_path, a);
  io::write_png(b_path, b);
  const json request = {{"op", "match"},
                        {"image_path", a_path.string()},
                        {"aux_image_path", b_path.string()},
                        {"view_pair", {pair.from, pair.to}}};
  const json reply = call_oracle_process(command_, request);
  MatchResult result;
  try {
    for (const auto& c : reply.at("correspondences")) {
      geometry::Correspondence corr;
      corr.p = {c.at("p").at(0).get<double>(), c.at("p").at(1).get<double>()};
      corr.p_prime = {c.at("p_prime").at(0).get<double>(), c.at("p_prime").at(1).get<double>()};
      corr.confidence = c.value("confidence", 1.0);
      if (!a.size().contains(static_cast<int>(std::lround(corr.p.x)), static_cast<int>(std::lround(corr.p.y))) ||
          !b.size().contains(static_cast<int>(std::lround(corr.p_prime.x)),
                             static_cast<int>(std::lround(corr.p_prime.y)))) {
        continue;  // contract: coordinates inside the images
      }
      result.correspondences.push_back(corr);
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::oracle_failure, "oracle '" + command_ + "' sent malformed correspondences: " + reply.dump());
  }
  result.similarity = result.correspondences.empty() ? 0.0 : reply.value("similarity", 1.0);
  return result;
}

json serve_oracle_request(const json& request, Segmenter& segmenter, Inpainter& inpainter, Matcher& matcher) {
  try {
    const std::string op = request.at("op").get<std::string>();
    const fs::path image_path = request.at("image_path").get<std::string>();
    const fs::path dir = image_path.parent_path();
    if (op == "segment") {
      const RgbImage image = io::read_png(image_path);
      const auto fg = points_from_json(request.value("fg_points", json::array()));
      const auto bg = points_from_json(request.value("bg_points", json::array()));
      const BinaryMask m = segmenter.segment(image, fg, bg);
      const auto out = dir / "reply_mask.png";
      io::write_mask_png(out, m);
      return {{"status", "ok"}, {"mask_path", out.string()}};
    }
    if (op == "inpaint") {
      const RgbImage image = io::read_png(image_path);
      const BinaryMask m = io::read_mask_png(request.at("mask_path").get<std::string>());
      const RgbImage filled = inpainter.inpaint(image, m);
      const auto out = dir / "reply_image.png";
      io::write_png(out, filled);
      return {{"status", "ok"}, {"image_path", out.string()}};
    }
    if (op == "match") {
      const RgbImage a = io::read_png(image_path);
      const RgbImage b = io::read_png(request.at("aux_image_path").get<std::string>());
      ViewPair pair;
      if (request.contains("view_pair")) {
        pair.from = request["view_pair"].at(0).get<std::size_t>();
        pair.to = request["view_pair"].at(1).get<std::size_t>();
      }
      const MatchResult r = matcher.match(a, b, pair);
      json corr = json::array();
      for (const auto& c : r.correspondences) {
        corr.push_back({{"p", {c.p.x, c.p.y}}, {"p_prime", {c.p_prime.x, c.p_prime.y}}, {"confidence", c.confidence}});
      }
      return {{"status", "ok"}, {"correspondences", corr}, {"similarity", r.similarity}};
    }
    return {{"status", "error"}, {"code", "invalid_argument"}, {"message", "unknown op '" + op + "'"}};
  } catch (const Error& e) {
    return {{"status", "error"}, {"code", std::string(to_string(e.code()))}, {"message", e.what()}};
  } catch (const std::exception& e) {
    return {{"status", "error"}, {"code", "invalid_argument"}, {"message", e.what()}};
  }
}

}  // namespace homer::oracles
