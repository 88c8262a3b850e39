#pragma once

#include <random>

namespace inrgan {

template <typename T>
template <typename Gen>
void InrDecoder<T>::init_shared(Gen& rng) {
  for (std::size_t b = 0; b < arch_.blocks.size(); ++b) {
    const auto& layers = arch_.blocks[b].layers;
    for (std::size_t l = 0; l < layers.size(); ++l) {
      if (layers[l].direct) continue;
      std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / layers[l].n_in));
      auto& p = shared(static_cast<int>(b), static_cast<int>(l));
      for (Eigen::Index i = 0; i < p.value.size(); ++i) p.value.data()[i] = static_cast<T>(dist(rng));
    }
  }
}

}  // namespace inrgan
