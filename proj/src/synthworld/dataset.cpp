#include "advcf/synthworld/dataset.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "advcf/json_util.hpp"

namespace advcf::world {
namespace {

constexpr int kFormatVersion = 1;

static_assert(std::endian::native == std::endian::little, "dataset files are little-endian");

void sample_split(const DatasetSpec& spec, const SplitCounts& counts, Rng& rng, std::uint64_t& next_id,
                  Dataset& out) {
  if (counts.per_bin.size() != spec.bin_edges.size() - 1) {
    throw std::invalid_argument("split counts must have one entry per age bin");
  }
  out.reserve(counts.total());
  for (int dx = 0; dx < 2; ++dx) {
    for (std::size_t bin = 0; bin < counts.per_bin.size(); ++bin) {
      const double lo = spec.bin_edges[bin];
      const double hi = spec.bin_edges[bin + 1];
      for (std::size_t k = 0; k < counts.per_bin[bin][dx]; ++k) {
        SynthSample s;
        s.id = next_id++;
        s.latent = sample_latent(spec.latents, rng);
        s.chron_age = rng.uniform(lo, hi);
        s.diagnosis = static_cast<Diagnosis>(dx);
        s.image = render(s.latent, s.chron_age, s.diagnosis, spec.render);
        out.push_back(std::move(s));
      }
    }
  }
}

struct Fnv {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  template <class T>
  void add(const T& v) {
    unsigned char bytes[sizeof(T)];
    std::memcpy(bytes, &v, sizeof(T));
    for (unsigned char b : bytes) {
      h ^= b;
      h *= 0x100000001b3ULL;
    }
  }
};

}  // namespace

std::size_t SplitCounts::total() const {
  std::size_t n = 0;
  for (const auto& c : per_bin) n += c[0] + c[1];
  return n;
}

DatasetSpec DatasetSpec::balanced(std::size_t train_per_cell, std::size_t val_per_cell, std::size_t test_per_cell,
                                  std::uint64_t seed) {
  DatasetSpec s;
  s.seed = seed;
  const std::size_t bins = s.bin_edges.size() - 1;
  s.train.per_bin.assign(bins, {train_per_cell, train_per_cell});
  s.val.per_bin.assign(bins, {val_per_cell, val_per_cell});
  s.test.per_bin.assign(bins, {test_per_cell, test_per_cell});
  return s;
}

MorphLatent sample_latent(const LatentRanges& ranges, Rng& rng) {
  MorphLatent l;
  l.ventricle_base_radius = rng.uniform(ranges.ventricle_min, ranges.ventricle_max);
  l.cortex_outer_radius = rng.uniform(ranges.cortex_min, ranges.cortex_max);
  l.center_offset_x = rng.uniform(-ranges.offset_max, ranges.offset_max);
  l.center_offset_y = rng.uniform(-ranges.offset_max, ranges.offset_max);
  l.texture_seed = rng.next();
  return l;
}

Splits sample_dataset(const DatasetSpec& spec) {
  if (spec.bin_edges.size() < 2) throw std::invalid_argument("dataset spec needs at least one age bin");
  for (std::size_t i = 0; i + 1 < spec.bin_edges.size(); ++i) {
    if (!(spec.bin_edges[i] < spec.bin_edges[i + 1])) throw std::invalid_argument("age bin edges must increase");
  }
  if (spec.bin_edges.front() < kRenderMinAge || spec.bin_edges.back() > kRenderMaxAge) {
    throw std::invalid_argument("age bins outside the render domain");
  }
  if (spec.train.total() + spec.val.total() + spec.test.total() == 0) {
    throw std::invalid_argument("empty dataset spec");
  }
  validate(spec.render);
  Rng rng(derive_seed(spec.seed, "data"));
  std::uint64_t next_id = 0;
  Splits out;
  sample_split(spec, spec.train, rng, next_id, out.train);
  sample_split(spec, spec.val, rng, next_id, out.val);
  sample_split(spec, spec.test, rng, next_id, out.test);
  return out;
}

DatasetSpec spurious_dataset_spec(const SpuriousSpec& sp) {
  DatasetSpec s;
  s.bin_edges = {kMinAge, kSpuriousSplitAge, kMaxAge};
  s.latents = sp.latents;
  s.render = sp.render;
  s.seed = sp.seed;
  // per_bin[bin] = {CN, AD}
  s.train.per_bin = {{0, sp.train_ad}, {sp.train_cn, 0}};
  s.val.per_bin = {{sp.val_per_cell, sp.val_per_cell}, {sp.val_per_cell, sp.val_per_cell}};
  s.test.per_bin = {{sp.test_per_cell, sp.test_per_cell}, {sp.test_per_cell, sp.test_per_cell}};
  return s;
}

Splits make_spurious(const SpuriousSpec& spec) { return sample_dataset(spurious_dataset_spec(spec)); }

void to_json(nlohmann::json& j, const LatentRanges& r) {
  j = {{"ventricle_min", r.ventricle_min}, {"ventricle_max", r.ventricle_max}, {"cortex_min", r.cortex_min},
       {"cortex_max", r.cortex_max},       {"offset_max", r.offset_max}};
}

void from_json(const nlohmann::json& j, LatentRanges& r) {
  require_keys(j, {"ventricle_min", "ventricle_max", "cortex_min", "cortex_max", "offset_max"}, "latents");
  read_opt(j, "ventricle_min", r.ventricle_min);
  read_opt(j, "ventricle_max", r.ventricle_max);
  read_opt(j, "cortex_min", r.cortex_min);
  read_opt(j, "cortex_max", r.cortex_max);
  read_opt(j, "offset_max", r.offset_max);
}

void to_json(nlohmann::json& j, const RenderConfig& c) {
  j = {{"size", c.size},
       {"edge_softness", c.edge_softness},
       {"ventricle_growth", c.ventricle_growth},
       {"cortex_thinning", c.cortex_thinning},
       {"ad_shift_years", c.ad_shift_years},
       {"noise_amplitude", c.noise_amplitude}};
}

void from_json(const nlohmann::json& j, RenderConfig& c) {
  require_keys(j, {"size", "edge_softness", "ventricle_growth", "cortex_thinning", "ad_shift_years", "noise_amplitude"},
               "render");
  read_opt(j, "size", c.size);
  read_opt(j, "edge_softness", c.edge_softness);
  read_opt(j, "ventricle_growth", c.ventricle_growth);
  read_opt(j, "cortex_thinning", c.cortex_thinning);
  read_opt(j, "ad_shift_years", c.ad_shift_years);
  read_opt(j, "noise_amplitude", c.noise_amplitude);
}

void to_json(nlohmann::json& j, const SplitCounts& c) {
  j = nlohmann::json::array();
  for (const auto& cell : c.per_bin) j.push_back({{"CN", cell[0]}, {"AD", cell[1]}});
}

void from_json(const nlohmann::json& j, SplitCounts& c) {
  if (!j.is_array()) throw ConfigError("split counts: expected an array of {CN, AD} objects");
  c.per_bin.clear();
  for (const auto& cell : j) {
    require_keys(cell, {"CN", "AD"}, "split counts");
    c.per_bin.push_back({cell.value("CN", std::size_t{0}), cell.value("AD", std::size_t{0})});
  }
}

void to_json(nlohmann::json& j, const DatasetSpec& s) {
  j = {{"bin_edges", s.bin_edges}, {"train", s.train}, {"val", s.val},      {"test", s.test},
       {"latents", s.latents},     {"render", s.render}, {"seed", s.seed}};
}

void from_json(const nlohmann::json& j, DatasetSpec& s) {
  require_keys(j, {"bin_edges", "train", "val", "test", "latents", "render", "seed", "balanced"}, "dataset");
  if (auto it = j.find("balanced"); it != j.end()) {
    require_keys(*it, {"train", "val", "test"}, "dataset.balanced");
    const auto keep_seed = s.seed;
    s = DatasetSpec::balanced(it->value("train", std::size_t{0}), it->value("val", std::size_t{0}),
                              it->value("test", std::size_t{0}), keep_seed);
  }
  read_opt(j, "bin_edges", s.bin_edges);
  read_opt(j, "train", s.train);
  read_opt(j, "val", s.val);
  read_opt(j, "test", s.test);
  read_opt(j, "latents", s.latents);
  read_opt(j, "render", s.render);
  read_opt(j, "seed", s.seed);
}

void to_json(nlohmann::json& j, const SpuriousSpec& s) {
  j = {{"train_ad", s.train_ad},           {"train_cn", s.train_cn}, {"val_per_cell", s.val_per_cell},
       {"test_per_cell", s.test_per_cell}, {"latents", s.latents},   {"render", s.render},
       {"seed", s.seed}};
}

void from_json(const nlohmann::json& j, SpuriousSpec& s) {
  require_keys(j, {"train_ad", "train_cn", "val_per_cell", "test_per_cell", "latents", "render", "seed"},
               "spurious dataset");
  read_opt(j, "train_ad", s.train_ad);
  read_opt(j, "train_cn", s.train_cn);
  read_opt(j, "val_per_cell", s.val_per_cell);
  read_opt(j, "test_per_cell", s.test_per_cell);
  read_opt(j, "latents", s.latents);
  read_opt(j, "render", s.render);
  read_opt(j, "seed", s.seed);
}

void export_dataset(const Dataset& data, const DatasetSpec& spec, const std::filesystem::path& stem) {
  const std::size_t n = spec.render.size;
  nlohmann::json meta;
  meta["format_version"] = kFormatVersion;
  meta["spec"] = spec;
  meta["seed"] = spec.seed;
  meta["count"] = data.size();
  meta["height"] = n;
  meta["width"] = n;
  meta["fingerprint"] = fingerprint(data);
  auto& samples = meta["samples"] = nlohmann::json::array();

  std::filesystem::path bin_path = stem;
  bin_path += ".bin";
  std::ofstream bin(bin_path, std::ios::binary);
  if (!bin) throw std::runtime_error("cannot write " + bin_path.string());
  for (const SynthSample& s : data) {
    if (s.image.numel() != n * n) throw std::invalid_argument("sample image does not match render size");
    bin.write(reinterpret_cast<const char*>(s.image.data().data()),
              static_cast<std::streamsize>(s.image.numel() * sizeof(double)));
    samples.push_back({{"id", s.id},
                       {"ventricle_base_radius", s.latent.ventricle_base_radius},
                       {"cortex_outer_radius", s.latent.cortex_outer_radius},
                       {"center_offset", {s.latent.center_offset_x, s.latent.center_offset_y}},
                       {"texture_seed", s.latent.texture_seed},
                       {"chron_age", s.chron_age},
                       {"diagnosis", std::string(diagnosis_name(s.diagnosis))}});
  }
  if (!bin) throw std::runtime_error("write failed for " + bin_path.string());

  std::filesystem::path json_path = stem;
  json_path += ".json";
  std::ofstream js(json_path);
  if (!js) throw std::runtime_error("cannot write " + json_path.string());
  js << meta.dump(1) << '\n';
}

Dataset import_dataset(const std::filesystem::path& stem, DatasetSpec* spec_out) {
  std::filesystem::path json_path = stem;
  json_path += ".json";
  std::ifstream js(json_path);
  if (!js) throw std::runtime_error("cannot read " + json_path.string());
  const nlohmann::json meta = nlohmann::json::parse(js);
  if (meta.at("format_version").get<int>() != kFormatVersion) throw std::runtime_error("unsupported dataset version");
  const std::size_t h = meta.at("height").get<std::size_t>();
  const std::size_t w = meta.at("width").get<std::size_t>();
  if (spec_out) *spec_out = meta.at("spec").get<DatasetSpec>();

  std::filesystem::path bin_path = stem;
  bin_path += ".bin";
  std::ifstream bin(bin_path, std::ios::binary);
  if (!bin) throw std::runtime_error("cannot read " + bin_path.string());

  Dataset data;
  for (const auto& m : meta.at("samples")) {
    SynthSample s;
    s.id = m.at("id").get<std::uint64_t>();
    s.latent.ventricle_base_radius = m.at("ventricle_base_radius").get<double>();
    s.latent.cortex_outer_radius = m.at("cortex_outer_radius").get<double>();
    s.latent.center_offset_x = m.at("center_offset").at(0).get<double>();
    s.latent.center_offset_y = m.at("center_offset").at(1).get<double>();
    s.latent.texture_seed = m.at("texture_seed").get<std::uint64_t>();
    s.chron_age = m.at("chron_age").get<double>();
    s.diagnosis = m.at("diagnosis").get<std::string>() == "AD" ? Diagnosis::AD : Diagnosis::CN;
    s.image = ad::Tensor({h, w});
    bin.read(reinterpret_cast<char*>(s.image.data().data()), static_cast<std::streamsize>(h * w * sizeof(double)));
    if (!bin) throw std::runtime_error("truncated image file " + bin_path.string());
    data.push_back(std::move(s));
  }
  if (fingerprint(data) != meta.at("fingerprint").get<std::uint64_t>()) {
    throw std::runtime_error("dataset fingerprint mismatch for " + stem.string());
  }
  return data;
}

std::uint64_t fingerprint(const Dataset& data) {
  Fnv f;
  for (const SynthSample& s : data) {
    f.add(s.id);
    f.add(s.latent.ventricle_base_radius);
    f.add(s.latent.cortex_outer_radius);
    f.add(s.latent.center_offset_x);
    f.add(s.latent.center_offset_y);
    f.add(s.latent.texture_seed);
    f.add(s.chron_age);
    f.add(static_cast<int>(s.diagnosis));
    for (double v : s.image.data()) f.add(v);
  }
  return f.h;
}

}  // namespace advcf::world
