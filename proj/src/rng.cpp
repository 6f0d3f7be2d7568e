#include "bagrisk/rng.hpp"

namespace bagrisk {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t root, std::initializer_list<std::uint64_t> path) {
  std::uint64_t state = splitmix64(root);
  for (auto step : path) state = splitmix64(state ^ splitmix64(step + 0x632be59bd9b4e019ULL));
  return state;
}

Engine make_engine(std::uint64_t root, std::initializer_list<std::uint64_t> path) {
  return Engine(derive_seed(root, path));
}

Eigen::MatrixXd standard_normal(Eigen::Index rows, Eigen::Index cols, Engine& engine) {
  std::normal_distribution<double> normal;
  Eigen::MatrixXd out(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) out(i, j) = normal(engine);
  }
  return out;
}

Eigen::VectorXd standard_normal(Eigen::Index size, Engine& engine) {
  std::normal_distribution<double> normal;
  Eigen::VectorXd out(size);
  for (Eigen::Index i = 0; i < size; ++i) out(i) = normal(engine);
  return out;
}

}  // namespace bagrisk
