#include "advcf/harness/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "advcf/harness/io.hpp"

namespace advcf::harness {
namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint format assumes a little-endian host");

std::filesystem::path with_ext(const std::filesystem::path& stem, const char* ext) {
  std::filesystem::path p = stem;
  p += ext;
  return p;
}

}  // namespace

void save_weights(const std::filesystem::path& stem, const models::Mlp& net, const nlohmann::json& meta) {
  std::string blob;
  for (const auto& t : net.params) {
    const auto d = t.data();
    blob.append(reinterpret_cast<const char*>(d.data()), d.size() * sizeof(double));
  }
  write_atomic(with_ext(stem, ".bin"), blob);
  write_json(with_ext(stem, ".json"),
             {{"format", "advcf-weights"}, {"version", 1}, {"widths", net.widths}, {"meta", meta}});
}

models::Mlp load_weights(const std::filesystem::path& stem, nlohmann::json* meta_out,
                         const std::vector<std::size_t>& expected_widths) {
  const nlohmann::json header = read_json(with_ext(stem, ".json"));
  if (header.value("format", "") != "advcf-weights") throw std::runtime_error(stem.string() + ": not a weight file");
  models::Mlp net;
  net.widths = header.at("widths").get<std::vector<std::size_t>>();
  if (net.widths.size() < 2) throw std::runtime_error(stem.string() + ": need at least two layer widths");
  if (!expected_widths.empty() && net.widths != expected_widths) {
    throw std::runtime_error(stem.string() + ": layer widths do not match the configured network");
  }
  std::ifstream in(with_ext(stem, ".bin"), std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + with_ext(stem, ".bin").string());
  for (std::size_t l = 0; l + 1 < net.widths.size(); ++l) {
    for (const ad::Shape& shape : {ad::Shape{net.widths[l], net.widths[l + 1]}, ad::Shape{1, net.widths[l + 1]}}) {
      ad::Tensor t(shape);
      in.read(reinterpret_cast<char*>(t.data().data()), static_cast<std::streamsize>(t.numel() * sizeof(double)));
      if (!in) throw std::runtime_error(stem.string() + ": weight file is truncated");
      net.params.push_back(std::move(t));
    }
  }
  if (in.peek() != std::char_traits<char>::eof()) throw std::runtime_error(stem.string() + ": trailing bytes");
  if (meta_out) *meta_out = header.value("meta", nlohmann::json::object());
  return net;
}

}  // namespace advcf::harness
