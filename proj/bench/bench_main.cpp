// Throughput comparison between the serial reference kernels and the
// OpenMP-parallel variants, plus a whole-training-step timing at both
// settings. The parallel and serial paths are bit-identical by contract
// (tests assert that); this target reports what the parallelism buys.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <string>
#include <vector>

#include "sentrec/corpus.hpp"
#include "sentrec/kernels.hpp"
#include "sentrec/model.hpp"
#include "sentrec/rng.hpp"

namespace {

using Clock = std::chrono::steady_clock;

double time_ms(const std::function<void()>& fn, int reps) {
  fn();  // warm-up
  auto t0 = Clock::now();
  for (int i = 0; i < reps; ++i) fn();
  auto t1 = Clock::now();
  return std::chrono::duration<double, std::milli>(t1 - t0).count() / reps;
}

void fill(std::vector<double>& v, sentrec::Rng& rng) {
  for (double& x : v) x = rng.next_double() - 0.5;
}

struct Row {
  std::string name;
  double serial_ms = 0.0;
  double parallel_ms = 0.0;
};

void print_rows(const std::vector<Row>& rows) {
  std::printf("%-28s %12s %12s %9s\n", "kernel", "serial_ms", "omp_ms", "speedup");
  for (const auto& r : rows) {
    std::printf("%-28s %12.3f %12.3f %8.2fx\n", r.name.c_str(), r.serial_ms, r.parallel_ms,
                r.parallel_ms > 0 ? r.serial_ms / r.parallel_ms : 0.0);
  }
}

}  // namespace

int main() {
  using namespace sentrec;
  std::vector<Row> rows;

  // Dense matmul kernels at a shape typical of the generator's FFN.
  {
    const int m = 64, k = 256, n = 256;
    Rng rng(7);
    std::vector<double> a(static_cast<size_t>(m) * k), b(static_cast<size_t>(k) * n),
        c(static_cast<size_t>(m) * n, 0.0);
    fill(a, rng);
    fill(b, rng);
    Row row{"mm " + std::to_string(m) + "x" + std::to_string(k) + "x" + std::to_string(n)};
    row.serial_ms =
        time_ms([&] { kernels::mm_serial(a.data(), b.data(), c.data(), m, k, n); }, 20);
    row.parallel_ms =
        time_ms([&] { kernels::mm_omp(a.data(), b.data(), c.data(), m, k, n); }, 20);
    rows.push_back(row);

    Row row_nt{"mm_nt " + std::to_string(m) + "x" + std::to_string(k) + "x" +
               std::to_string(n)};
    std::vector<double> bt(static_cast<size_t>(n) * k);
    fill(bt, rng);
    row_nt.serial_ms =
        time_ms([&] { kernels::mm_nt_serial(a.data(), bt.data(), c.data(), m, k, n); }, 20);
    row_nt.parallel_ms =
        time_ms([&] { kernels::mm_nt_omp(a.data(), bt.data(), c.data(), m, k, n); }, 20);
    rows.push_back(row_nt);

    Row row_tn{"mm_tn " + std::to_string(m) + "x" + std::to_string(k) + "x" +
               std::to_string(n)};
    std::vector<double> ct(static_cast<size_t>(k) * n, 0.0);
    row_tn.serial_ms =
        time_ms([&] { kernels::mm_tn_serial(a.data(), b.data(), ct.data(), m, k, n); }, 20);
    row_tn.parallel_ms =
        time_ms([&] { kernels::mm_tn_omp(a.data(), b.data(), ct.data(), m, k, n); }, 20);
    rows.push_back(row_tn);
  }

  // One full training step (batch loss + gradients) on a small synthetic
  // corpus, toggling the process-wide parallel switch.
  {
    corpus::SyntheticSpec spec = corpus::SyntheticSpec::defaults();
    spec.n_users = 20;
    spec.n_items = 12;
    spec.interactions_per_user = 8;
    spec.seed = 11;
    corpus::SyntheticCorpus corpus_data = corpus::generate_synthetic_corpus(spec);

    model::Model m;
    m.cfg.rating_mode = model::RatingMode::DEmb;
    m.vocab = model::build_vocab(corpus_data.records);
    {
      std::vector<std::string> users, items;
      for (const auto& r : corpus_data.records) {
        if (std::find(users.begin(), users.end(), r.user_id) == users.end())
          users.push_back(r.user_id);
        if (std::find(items.begin(), items.end(), r.item_id) == items.end())
          items.push_back(r.item_id);
      }
      m.users = model::IdMap::build(users);
      m.items = model::IdMap::build(items);
    }
    m.cfg.vocab_size = m.vocab.size();
    m.cfg.n_users = spec.n_users;
    m.cfg.n_items = spec.n_items;
    m.cfg.seed = 3;
    m.cfg.validate();
    m.params = model::init_model(m.cfg);

    std::vector<model::Example> batch;
    for (size_t i = 0; i < corpus_data.records.size() && batch.size() < 64; ++i)
      batch.push_back(model::make_example(m, corpus_data.records[i]));

    model::ModelParameters grads = model::zeros_like(m.params);
    Row row{"train step (64 ex, 8 lanes)"};
    kernels::set_parallel(false);
    row.serial_ms = time_ms(
        [&] { model::batch_loss_and_grads(m, batch, &grads, uint64_t{5}, 8); }, 3);
    kernels::set_parallel(true);
    row.parallel_ms = time_ms(
        [&] { model::batch_loss_and_grads(m, batch, &grads, uint64_t{5}, 8); }, 3);
    rows.push_back(row);
  }

  print_rows(rows);
  std::printf("\nparallel kernels %s at build time\n",
              kernels::parallel_enabled() ? "enabled" : "compiled out (serial fallback)");
  return 0;
}
