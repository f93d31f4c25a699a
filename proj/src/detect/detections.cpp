#include "semlink/detect/detections.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cmath>
#include <cstring>
#include <fstream>
#include <json.hpp>
#include <stdexcept>

namespace semlink::detect {

using nlohmann::json;

double iou(const BBox& a, const BBox& b) {
  double ix0 = std::max(a.x0, b.x0);
  double iy0 = std::max(a.y0, b.y0);
  double ix1 = std::min(a.x1, b.x1);
  double iy1 = std::min(a.y1, b.y1);
  double iw = ix1 - ix0, ih = iy1 - iy0;
  if (iw <= 0 || ih <= 0) return 0.0;
  double inter = iw * ih;
  double uni = a.area() + b.area() - inter;
  return uni > 0 ? inter / uni : 0.0;
}

std::filesystem::path sidecar_path(const std::filesystem::path& image_path) {
  return std::filesystem::path(image_path.string() + ".det.json");
}

namespace {

DetectionSet parse_detections(const std::string& text, int width, int height,
                              DetectionSource source, const std::string& origin) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::runtime_error("detections " + origin + ": " + e.what());
  }
  if (!root.is_array())
    throw std::runtime_error("detections " + origin + ": top level must be an array");
  DetectionSet out;
  out.source = source;
  for (size_t i = 0; i < root.size(); ++i) {
    const auto& e = root[i];
    std::string at = origin + " entry " + std::to_string(i);
    if (!e.is_object() || !e.contains("class") || !e.contains("conf") || !e.contains("bbox"))
      throw std::runtime_error("detections " + at + ": need class/conf/bbox");
    Detection d;
    d.cls = e["class"].get<std::string>();
    d.conf = e["conf"].get<double>();
    const auto& bb = e["bbox"];
    if (!bb.is_array() || bb.size() != 4)
      throw std::runtime_error("detections " + at + ": bbox must be [x0,y0,x1,y1]");
    d.box = {bb[0].get<double>(), bb[1].get<double>(), bb[2].get<double>(), bb[3].get<double>()};
    if (d.conf < 0 || d.conf > 1)
      throw std::runtime_error("detections " + at + ": conf outside [0,1]");
    if (!(d.box.x0 >= 0 && d.box.x0 < d.box.x1 && d.box.x1 <= width && d.box.y0 >= 0 &&
          d.box.y0 < d.box.y1 && d.box.y1 <= height))
      throw std::runtime_error("detections " + at + ": bbox outside image bounds " +
                               std::to_string(width) + "x" + std::to_string(height));
    out.items.push_back(std::move(d));
  }
  return out;
}

}  // namespace

DetectionSet load_detections(const std::filesystem::path& image_path, int width, int height) {
  auto side = sidecar_path(image_path);
  std::ifstream f(side);
  if (!f) {
    DetectionSet empty;
    empty.source = DetectionSource::kStub;
    return empty;
  }
  std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return parse_detections(text, width, height, DetectionSource::kSidecar, side.string());
}

void save_detections(const DetectionSet& dets, const std::filesystem::path& sidecar) {
  json root = json::array();
  for (const auto& d : dets.items) {
    root.push_back({{"class", d.cls},
                    {"conf", d.conf},
                    {"bbox", {d.box.x0, d.box.y0, d.box.x1, d.box.y1}}});
  }
  std::ofstream f(sidecar, std::ios::trunc);
  if (!f) throw std::runtime_error("detections: cannot write " + sidecar.string());
  f << root.dump(2) << "\n";
}

DetectionSet run_external_detector(const std::string& command_template,
                                   const std::filesystem::path& image_path, int width,
                                   int height, int timeout_ms) {
  std::string cmd = command_template;
  const std::string ph = "{image}";
  std::string quoted = "'" + image_path.string() + "'";
  for (size_t pos = cmd.find(ph); pos != std::string::npos; pos = cmd.find(ph))
    cmd.replace(pos, ph.size(), quoted);

  int out_pipe[2], err_pipe[2];
  if (pipe(out_pipe) != 0 || pipe(err_pipe) != 0)
    throw std::runtime_error("detector: pipe failed");
  pid_t pid = fork();
  if (pid < 0) throw std::runtime_error("detector: fork failed");
  if (pid == 0) {
    dup2(out_pipe[1], STDOUT_FILENO);
    dup2(err_pipe[1], STDERR_FILENO);
    close(out_pipe[0]);
    close(out_pipe[1]);
    close(err_pipe[0]);
    close(err_pipe[1]);
    execl("/bin/sh", "sh", "-c", cmd.c_str(), nullptr);
    _exit(127);
  }
  close(out_pipe[1]);
  close(err_pipe[1]);

  std::string out, err;
  bool timed_out = false;
  auto deadline_ms = timeout_ms;
  pollfd fds[2] = {{out_pipe[0], POLLIN, 0}, {err_pipe[0], POLLIN, 0}};
  bool open_[2] = {true, true};
  char buf[4096];
  while (open_[0] || open_[1]) {
    int rc = poll(fds, 2, deadline_ms > 100 ? 100 : deadline_ms);
    if (rc >= 0) {
      for (int i = 0; i < 2; ++i) {
        if (!open_[i]) continue;
        if (fds[i].revents & (POLLIN | POLLHUP)) {
          ssize_t n = read(fds[i].fd, buf, sizeof buf);
          if (n > 0)
            (i == 0 ? out : err).append(buf, static_cast<size_t>(n));
          else {
            open_[i] = false;
            fds[i].fd = -1;
          }
        }
      }
    }
    deadline_ms -= 100;
    if (deadline_ms <= 0 && (open_[0] || open_[1])) {
      timed_out = true;
      kill(pid, SIGKILL);
      break;
    }
  }
  close(out_pipe[0]);
  close(err_pipe[0]);
  int status = 0;
  waitpid(pid, &status, 0);
  if (timed_out) throw std::runtime_error("detector timeout after " +
                                          std::to_string(timeout_ms) + " ms: " + cmd);
  if (!WIFEXITED(status) || WEXITSTATUS(status) != 0)
    throw std::runtime_error("detector exited with status " +
                             std::to_string(WIFEXITED(status) ? WEXITSTATUS(status) : -1) +
                             ": " + cmd + (err.empty() ? "" : ("; stderr: " + err)));
  auto dets = parse_detections(out, width, height, DetectionSource::kExternal, "command output");
  return dets;
}

}  // namespace semlink::detect
