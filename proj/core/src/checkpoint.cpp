#include "denoise/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <stdexcept>
#include <vector>

#include "denoise/data.hpp"

namespace denoise {

namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes little-endian");

constexpr char kMagic[4] = {'D', 'N', 'C', 'K'};

template <typename T>
void put(std::string& out, T value) {
  char buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  out.append(buf, sizeof(T));
}

void put_tensor(std::string& out, const std::string& name, const Matrix& m) {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
  out += name;
  put<std::uint64_t>(out, m.rows());
  put<std::uint64_t>(out, m.cols());
  for (double x : m.values()) put<double>(out, x);
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  template <typename T>
  T get() {
    if (pos_ + sizeof(T) > bytes_.size()) throw std::runtime_error("checkpoint truncated");
    T value;
    std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }
  std::string get_string(std::size_t n) {
    if (pos_ + n > bytes_.size()) throw std::runtime_error("checkpoint truncated");
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string encode_checkpoint(const Checkpoint& ckpt) {
  std::vector<std::pair<std::string, const Matrix*>> tensors = {
      {"embedding", &ckpt.classifier.embedding}, {"w1", &ckpt.classifier.w1},
      {"b1", &ckpt.classifier.b1},               {"w2", &ckpt.classifier.w2},
      {"b2", &ckpt.classifier.b2},
  };
  Matrix dropout(1, 1, ckpt.classifier.dropout_rate);
  Matrix rep(1, 1, ckpt.rep_mode == RepMode::kLogits ? 0.0 : 1.0);
  tensors.emplace_back("dropout_rate", &dropout);
  tensors.emplace_back("rep_mode", &rep);
  if (ckpt.noise_head) {
    tensors.emplace_back("noise.v1", &ckpt.noise_head->v1);
    tensors.emplace_back("noise.c1", &ckpt.noise_head->c1);
    tensors.emplace_back("noise.v2", &ckpt.noise_head->v2);
    tensors.emplace_back("noise.c2", &ckpt.noise_head->c2);
  }

  std::string out(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint64_t>(out, ckpt.config_hash);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, m] : tensors) put_tensor(out, name, *m);
  return out;
}

Checkpoint decode_checkpoint(const std::string& bytes) {
  Reader r(bytes);
  if (r.get_string(4) != std::string(kMagic, 4)) throw std::runtime_error("not a denoise checkpoint");
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint ckpt;
  ckpt.config_hash = r.get<std::uint64_t>();
  const auto count = r.get<std::uint32_t>();
  std::map<std::string, Matrix> tensors;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name = r.get_string(r.get<std::uint32_t>());
    const auto rows = r.get<std::uint64_t>();
    const auto cols = r.get<std::uint64_t>();
    Matrix m(rows, cols);
    for (double& x : m.values()) x = r.get<double>();
    tensors.emplace(name, std::move(m));
  }
  if (!r.done()) throw std::runtime_error("trailing bytes in checkpoint");

  auto take = [&](const std::string& name) {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw std::runtime_error("checkpoint missing tensor " + name);
    return it->second;
  };
  ckpt.classifier.embedding = take("embedding");
  ckpt.classifier.w1 = take("w1");
  ckpt.classifier.b1 = take("b1");
  ckpt.classifier.w2 = take("w2");
  ckpt.classifier.b2 = take("b2");
  ckpt.classifier.dropout_rate = take("dropout_rate")(0, 0);
  ckpt.rep_mode = take("rep_mode")(0, 0) == 0.0 ? RepMode::kLogits : RepMode::kConcat;
  if (tensors.count("noise.v1")) {
    NoiseHeadParams n;
    n.v1 = take("noise.v1");
    n.c1 = take("noise.c1");
    n.v2 = take("noise.v2");
    n.c2 = take("noise.c2");
    ckpt.noise_head = std::move(n);
  }
  return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  const std::string bytes = encode_checkpoint(ckpt);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(read_file(path));
}

}  // namespace denoise
