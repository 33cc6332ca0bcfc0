#pragma once

// Seeded Gaussian embedding sources. Items produced by the synthetic
// provider are opaque tokens "synth:<batch>:<index>"; the paired embedder
// turns a token into mean + batch * drift + sigma * z, where z is drawn from
// a normal stream seeded by mix_seed(seed, index). Embedding is therefore a
// pure function of the token.

#include <charconv>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "divsat/embedset.hpp"
#include "divsat/error.hpp"
#include "divsat/random.hpp"
#include "divsat/saturation.hpp"

namespace divsat {

struct GaussianSpec {
  std::size_t k = 1;
  std::vector<double> mean;  // empty means the origin
  double sigma = 1.0;
  std::uint64_t seed = 0;

  void validate() const {
    if (k == 0) throw Error(Errc::invalid_argument, "dimension must be >= 1");
    if (!mean.empty() && mean.size() != k)
      throw Error(Errc::dimension_mismatch, "mean has dimension " + std::to_string(mean.size()) +
                                                ", expected " + std::to_string(k));
    if (!(sigma > 0.0)) throw Error(Errc::invalid_argument, "sigma must be positive");
  }
  double mean_at(std::size_t j) const { return mean.empty() ? 0.0 : mean[j]; }
};

struct DriftSpec {
  GaussianSpec base;
  std::vector<double> drift;  // empty means no drift

  void validate() const {
    base.validate();
    if (!drift.empty() && drift.size() != base.k)
      throw Error(Errc::dimension_mismatch, "drift has dimension " +
                                                std::to_string(drift.size()) + ", expected " +
                                                std::to_string(base.k));
  }
  double drift_at(std::size_t j) const { return drift.empty() ? 0.0 : drift[j]; }
};

/// n i.i.d. draws from N(mean, sigma^2 I), ids "g0".."g{n-1}".
inline EmbeddingSet gaussian_set(const GaussianSpec& spec, std::size_t n) {
  spec.validate();
  if (n == 0) throw Error(Errc::empty_set, "requested an empty Gaussian set");
  NormalSampler normal(spec.seed);
  std::vector<EmbeddingRecord> records(n);
  for (std::size_t i = 0; i < n; ++i) {
    records[i].id = "g" + std::to_string(i);
    records[i].vector.resize(spec.k);
    for (std::size_t j = 0; j < spec.k; ++j)
      records[i].vector[j] = spec.mean_at(j) + spec.sigma * normal();
  }
  return EmbeddingSet(std::move(records));
}

struct SynthToken {
  std::uint64_t batch = 0;
  std::uint64_t index = 0;
};

inline std::string format_token(const SynthToken& t) {
  return "synth:" + std::to_string(t.batch) + ":" + std::to_string(t.index);
}

inline std::optional<SynthToken> parse_token(std::string_view text) {
  constexpr std::string_view prefix = "synth:";
  if (text.substr(0, prefix.size()) != prefix) return std::nullopt;
  text.remove_prefix(prefix.size());
  const auto colon = text.find(':');
  if (colon == std::string_view::npos) return std::nullopt;
  SynthToken t;
  const auto b = text.substr(0, colon);
  const auto i = text.substr(colon + 1);
  if (std::from_chars(b.data(), b.data() + b.size(), t.batch).ptr != b.data() + b.size() ||
      b.empty())
    return std::nullopt;
  if (std::from_chars(i.data(), i.data() + i.size(), t.index).ptr != i.data() + i.size() ||
      i.empty())
    return std::nullopt;
  return t;
}

// FNV-1a; lets the synthetic embedder accept arbitrary text deterministically.
inline std::uint64_t text_hash(std::string_view text) noexcept {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

/// Vector for one provider item. Text that is not a synth token is hashed
/// into an item index in batch 0.
inline std::vector<double> synth_vector(const DriftSpec& spec, std::string_view text) {
  const auto token = parse_token(text).value_or(SynthToken{0, text_hash(text)});
  NormalSampler normal(mix_seed(spec.base.seed, token.index));
  std::vector<double> v(spec.base.k);
  const auto shift = static_cast<double>(token.batch);
  for (std::size_t j = 0; j < v.size(); ++j)
    v[j] = spec.base.mean_at(j) + shift * spec.drift_at(j) + spec.base.sigma * normal();
  return v;
}

/// Emits tokens; batch b draws from mean + b * drift.
class SynthProvider : public BatchProvider {
 public:
  explicit SynthProvider(DriftSpec spec, std::uint64_t first_batch = 0,
                         std::uint64_t first_index = 0)
      : spec_(std::move(spec)), batch_(first_batch), next_index_(first_index) {
    spec_.validate();
  }

  std::vector<std::string> next_batch(std::size_t count, const Context&) override {
    std::vector<std::string> out;
    if (count == 0) return out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) out.push_back(format_token({batch_, next_index_++}));
    ++batch_;
    return out;
  }

  std::uint64_t batch() const noexcept { return batch_; }
  std::uint64_t next_index() const noexcept { return next_index_; }

 private:
  DriftSpec spec_;
  std::uint64_t batch_;
  std::uint64_t next_index_;
};

class SynthEmbedder : public Embedder {
 public:
  explicit SynthEmbedder(DriftSpec spec) : spec_(std::move(spec)) { spec_.validate(); }

  EmbeddingSet embed(const std::vector<std::string>& items) override {
    std::vector<EmbeddingRecord> records(items.size());
    for (std::size_t i = 0; i < items.size(); ++i) {
      records[i].id = std::to_string(i);
      records[i].vector = synth_vector(spec_, items[i]);
    }
    return EmbeddingSet(std::move(records));
  }

 private:
  DriftSpec spec_;
};

struct SynthSource {
  SynthProvider provider;
  SynthEmbedder embedder;
};

inline SynthSource drifting_provider(const DriftSpec& spec) {
  return {SynthProvider(spec), SynthEmbedder(spec)};
}

inline SynthSource stationary_provider(const GaussianSpec& spec) {
  return drifting_provider(DriftSpec{spec, {}});
}

}  // namespace divsat
