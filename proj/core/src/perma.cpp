#include "perdl/perma.hpp"

#include "perdl/distances.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <functional>
#include <map>
#include <limits>
#include <mutex>
#include <numeric>
#include <stdexcept>
#include <thread>

namespace perdl {

namespace {

// Runs fn(i) for i in [0, n) on up to `threads` workers and rethrows the
// first failure by index, tagged with the failing client's id. Workers only
// touch disjoint slots, so any schedule produces the same state.
void parallel_for_clients(const std::vector<ClientState>& clients, int threads,
                          const std::function<void(int)>& fn) {
  const int n = static_cast<int>(clients.size());
  std::vector<std::exception_ptr> failures(static_cast<std::size_t>(n));
  if (threads <= 1 || n <= 1) {
    for (int i = 0; i < n; ++i) {
      try {
        fn(i);
      } catch (...) {
        failures[static_cast<std::size_t>(i)] = std::current_exception();
      }
    }
  } else {
    std::atomic<int> cursor{0};
    auto worker = [&] {
      for (;;) {
        int i = cursor.fetch_add(1);
        if (i >= n) return;
        try {
          fn(i);
        } catch (...) {
          failures[static_cast<std::size_t>(i)] = std::current_exception();
        }
      }
    };
    std::vector<std::thread> pool;
    const int count = std::min(threads, n);
    pool.reserve(static_cast<std::size_t>(count));
    for (int t = 0; t < count; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (int i = 0; i < n; ++i) {
    if (failures[static_cast<std::size_t>(i)]) {
      try {
        std::rethrow_exception(failures[static_cast<std::size_t>(i)]);
      } catch (const std::exception& e) {
        throw std::runtime_error(
            "client " + std::to_string(clients[static_cast<std::size_t>(i)].id) +
            ": " + e.what());
      }
    }
  }
}

double quiet_nan() { return std::numeric_limits<double>::quiet_NaN(); }

double elapsed_ms(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double, std::milli>(
             std::chrono::steady_clock::now() - start)
      .count();
}

// Typed dictionary payload crossing the client/server boundary. The
// orchestrator only moves DictionaryMessage values through MessageChannel,
// so swapping the channel for a wire transport keeps the round logic as-is.
struct DictionaryMessage {
  int round = 0;
  Direction direction = Direction::kClientToServer;
  int client_id = 0;
  Eigen::MatrixXd payload;
  std::string kind;
};

class MessageChannel {
 public:
  explicit MessageChannel(std::vector<MessageRecord>& log) : log_(log) {}

  void send(DictionaryMessage message) {
    std::lock_guard<std::mutex> lock(mutex_);
    queue_.push_back(std::move(message));
  }

  // All pending messages in client order. Sorting here (not at send time)
  // keeps both the aggregation and the message log deterministic under any
  // worker schedule.
  std::vector<DictionaryMessage> drain() {
    std::lock_guard<std::mutex> lock(mutex_);
    std::vector<DictionaryMessage> out = std::move(queue_);
    queue_.clear();
    std::stable_sort(out.begin(), out.end(),
                     [](const DictionaryMessage& a, const DictionaryMessage& b) {
                       return a.client_id < b.client_id;
                     });
    for (const auto& msg : out) {
      log_.push_back({msg.round, msg.direction, msg.client_id,
                      msg.payload.rows(), msg.payload.cols(), msg.kind});
    }
    return out;
  }

 private:
  std::mutex mutex_;
  std::vector<DictionaryMessage> queue_;
  std::vector<MessageRecord>& log_;
};

// Per-round evaluation against ground truth; NaN columns otherwise.
RoundTrace make_trace(int round, const ClientState& client,
                      const Dictionary& server_global, const GroundTruth* truth,
                      double wall_ms) {
  RoundTrace row;
  row.round = round;
  row.client_id = client.id;
  row.wall_ms = wall_ms;
  row.recon_residual =
      sparse_code(client.data, client.partition.concatenated(),
                  client.algorithm.threshold)
          .residual;
  if (truth != nullptr) {
    row.global_err = server_global.num_atoms() > 0
                         ? dist_12(server_global, truth->global_dict).value
                         : 0.0;
    const Dictionary& local_truth =
        truth->local_dicts.at(static_cast<std::size_t>(client.id));
    row.local_err = client.partition.num_local() > 0
                        ? dist_12(client.partition.local_part, local_truth).value
                        : 0.0;
  } else {
    row.global_err = quiet_nan();
    row.local_err = quiet_nan();
  }
  return row;
}

}  // namespace

PartitionedDictionary local_update(const Eigen::MatrixXd& y,
                                   const PartitionedDictionary& part,
                                   const DlAlgorithm& alg,
                                   std::vector<std::string>* log) {
  const int r_g = part.num_global();
  StepResult step = dl_step(y, part.concatenated(), alg);
  const Eigen::MatrixXd& out = step.dictionary.atoms();
  const int r = static_cast<int>(out.cols());
  if (r_g == 0) {
    return PartitionedDictionary(Dictionary::empty(part.dim()),
                                 step.dictionary);
  }

  std::vector<bool> used(static_cast<std::size_t>(r), false);
  Eigen::MatrixXd global(part.dim(), r_g);
  std::vector<int> taken;
  taken.reserve(static_cast<std::size_t>(r_g));
  for (int j = 0; j < r_g; ++j) {
    const Eigen::VectorXd reference = part.global_part.atoms().col(j);
    int best = -1;
    int unconstrained = -1;
    double best_cost = std::numeric_limits<double>::infinity();
    double unconstrained_cost = std::numeric_limits<double>::infinity();
    for (int k = 0; k < r; ++k) {
      double cost = vector_d2(reference, out.col(k));
      if (cost < unconstrained_cost) {
        unconstrained_cost = cost;
        unconstrained = k;
      }
      if (!used[static_cast<std::size_t>(k)] && cost < best_cost) {
        best_cost = cost;
        best = k;
      }
    }
    if (best < 0) {
      throw std::logic_error("local_update: no atom left to match");
    }
    if (log != nullptr && unconstrained != best) {
      log->push_back("reference atom " + std::to_string(j) +
                     ": nearest output atom already claimed, taking atom " +
                     std::to_string(best));
    }
    used[static_cast<std::size_t>(best)] = true;
    taken.push_back(best);
    double inner = reference.dot(out.col(best));
    if (inner == 0.0 && log != nullptr) {
      log->push_back("reference atom " + std::to_string(j) +
                     ": zero inner product while sign-aligning, using +1");
    }
    global.col(j) = (inner >= 0.0 ? 1.0 : -1.0) * out.col(best);
  }

  Eigen::MatrixXd local(part.dim(), r - r_g);
  Eigen::Index cursor = 0;
  for (int k = 0; k < r; ++k) {
    if (!used[static_cast<std::size_t>(k)]) local.col(cursor++) = out.col(k);
  }
  return PartitionedDictionary(
      Dictionary(std::move(global), step.dictionary.unit_norm()),
      Dictionary(std::move(local), step.dictionary.unit_norm()));
}

PermaResult run_perma(std::vector<ClientState> clients,
                      const PermaOptions& opts, const GroundTruth* truth) {
  const int n = static_cast<int>(clients.size());
  if (n < 2) throw std::invalid_argument("run_perma: at least two clients required");
  if (opts.rounds < 0) throw std::invalid_argument("run_perma: rounds >= 0 required");
  if (opts.r_global < 0) throw std::invalid_argument("run_perma: r_global >= 0 required");

  PermaResult result;
  ServerState& server = result.server;
  MessageChannel to_server(server.messages);
  MessageChannel to_clients(server.messages);

  // Layer order is the client list order; ids only address messages.
  std::map<int, int> index_of_id;
  for (int i = 0; i < n; ++i) {
    if (!index_of_id.emplace(clients[static_cast<std::size_t>(i)].id, i).second) {
      throw std::invalid_argument("run_perma: duplicate client id " +
                                  std::to_string(clients[static_cast<std::size_t>(i)].id));
    }
  }

  // Initialization: every client produces (or reuses) its full dictionary
  // and uploads it for matching.
  parallel_for_clients(clients, opts.threads, [&](int i) {
    ClientState& c = clients[static_cast<std::size_t>(i)];
    if (!c.initial.has_value()) {
      if (c.num_atoms < 1) {
        throw std::invalid_argument("num_atoms must be set when no initial dictionary is given");
      }
      c.initial = warm_start(c.data, c.warm_cfg, c.algorithm, c.num_atoms);
    }
    to_server.send({0, Direction::kClientToServer, c.id, c.initial->atoms(),
                    "init_dictionary"});
  });

  std::vector<Dictionary> initials(static_cast<std::size_t>(n),
                                   Dictionary::empty(1));
  for (auto& msg : to_server.drain()) {
    initials.at(static_cast<std::size_t>(index_of_id.at(msg.client_id))) =
        Dictionary(std::move(msg.payload), false);
  }

  result.initial_match = global_matching(initials, opts.r_global, opts.renormalize);
  server.global = result.initial_match.global_estimate;
  for (int i = 0; i < n; ++i) {
    ClientState& c = clients[static_cast<std::size_t>(i)];
    to_clients.send({0, Direction::kServerToClient, c.id, server.global.atoms(),
                     "global_broadcast"});
    to_clients.send(
        {0, Direction::kServerToClient, c.id,
         result.initial_match.local_estimates[static_cast<std::size_t>(i)].atoms(),
         "local_return"});
  }
  {
    std::vector<Eigen::MatrixXd> global_part(static_cast<std::size_t>(n));
    std::vector<Eigen::MatrixXd> local_part(static_cast<std::size_t>(n));
    for (auto& msg : to_clients.drain()) {
      const auto slot_index =
          static_cast<std::size_t>(index_of_id.at(msg.client_id));
      auto& slot = msg.kind == "global_broadcast" ? global_part[slot_index]
                                                  : local_part[slot_index];
      slot = std::move(msg.payload);
    }
    for (int i = 0; i < n; ++i) {
      ClientState& c = clients[static_cast<std::size_t>(i)];
      c.partition = PartitionedDictionary(
          Dictionary(std::move(global_part[static_cast<std::size_t>(i)]),
                     opts.renormalize),
          Dictionary(std::move(local_part[static_cast<std::size_t>(i)]),
                     initials[static_cast<std::size_t>(i)].unit_norm()));
    }
  }
  for (int i = 0; i < n; ++i) {
    server.history.push_back(make_trace(0, clients[static_cast<std::size_t>(i)],
                                        server.global, truth, 0.0));
  }

  std::vector<double> wall(static_cast<std::size_t>(n), 0.0);
  for (int t = 1; t <= opts.rounds; ++t) {
    parallel_for_clients(clients, opts.threads, [&](int i) {
      ClientState& c = clients[static_cast<std::size_t>(i)];
      const auto start = std::chrono::steady_clock::now();
      if (c.t_refine > 0 && c.partition.num_local() > 0) {
        c.partition = PartitionedDictionary(
            c.partition.global_part,
            refine_local(c.data, c.partition, c.algorithm, c.t_refine));
      }
      c.partition = local_update(c.data, c.partition, c.algorithm);
      wall[static_cast<std::size_t>(i)] =
          opts.record_timings ? elapsed_ms(start) : 0.0;
      to_server.send({t, Direction::kClientToServer, c.id,
                      c.partition.global_part.atoms(), "global_part"});
    });

    // Aggregation barrier: the server sees only what crossed the channel;
    // the mean is taken in client order.
    Eigen::MatrixXd sum =
        Eigen::MatrixXd::Zero(clients.front().data.rows(), opts.r_global);
    for (const auto& msg : to_server.drain()) {
      sum += msg.payload;
    }
    Eigen::MatrixXd averaged = sum / static_cast<double>(n);
    if (opts.renormalize) {
      for (Eigen::Index j = 0; j < averaged.cols(); ++j) {
        double norm = averaged.col(j).norm();
        if (norm < 1e-12) {
          throw std::runtime_error("run_perma: averaged global column " +
                                   std::to_string(j) + " vanished at round " +
                                   std::to_string(t));
        }
        averaged.col(j) /= norm;
      }
    }
    server.global = Dictionary(std::move(averaged), opts.renormalize);
    server.round = t;

    for (int i = 0; i < n; ++i) {
      to_clients.send({t, Direction::kServerToClient,
                       clients[static_cast<std::size_t>(i)].id,
                       server.global.atoms(), "global_broadcast"});
    }
    for (auto& msg : to_clients.drain()) {
      ClientState& c =
          clients.at(static_cast<std::size_t>(index_of_id.at(msg.client_id)));
      c.partition = PartitionedDictionary(
          Dictionary(std::move(msg.payload), opts.renormalize),
          c.partition.local_part);
    }
    for (int i = 0; i < n; ++i) {
      server.history.push_back(make_trace(t, clients[static_cast<std::size_t>(i)],
                                          server.global, truth,
                                          wall[static_cast<std::size_t>(i)]));
    }
  }

  result.partitions.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    result.partitions.push_back(clients[static_cast<std::size_t>(i)].partition);
  }
  return result;
}

std::vector<RoundTrace> run_independent(std::vector<ClientState> clients,
                                        int rounds, const GroundTruth& truth,
                                        int threads) {
  const int n = static_cast<int>(clients.size());
  if (n < 1) throw std::invalid_argument("run_independent: no clients");
  if (rounds < 0) throw std::invalid_argument("run_independent: rounds >= 0 required");

  parallel_for_clients(clients, threads, [&](int i) {
    ClientState& c = clients[static_cast<std::size_t>(i)];
    if (!c.initial.has_value()) {
      if (c.num_atoms < 1) {
        throw std::invalid_argument("num_atoms must be set when no initial dictionary is given");
      }
      c.initial = warm_start(c.data, c.warm_cfg, c.algorithm, c.num_atoms);
    }
  });

  const int r_g = truth.global_dict.num_atoms();
  std::vector<Dictionary> current;
  current.reserve(static_cast<std::size_t>(n));
  for (auto& c : clients) current.push_back(*c.initial);

  std::vector<RoundTrace> history;
  auto evaluate = [&](int round, int i, double wall_ms) {
    const ClientState& c = clients[static_cast<std::size_t>(i)];
    const Dictionary& d = current[static_cast<std::size_t>(i)];
    RoundTrace row;
    row.round = round;
    row.client_id = c.id;
    row.wall_ms = wall_ms;
    row.recon_residual = sparse_code(c.data, d, c.algorithm.threshold).residual;
    // Without a declared split, score the atoms best aligned onto the true
    // global block; the complement plays the local role.
    SubsetAlignment alignment = align_subset(truth.global_dict, d);
    row.global_err = alignment.value;
    const Dictionary& local_truth = truth.local_dicts.at(static_cast<std::size_t>(c.id));
    if (local_truth.num_atoms() > 0) {
      std::vector<bool> taken(static_cast<std::size_t>(d.num_atoms()), false);
      for (int idx : alignment.indices) taken[static_cast<std::size_t>(idx)] = true;
      Eigen::MatrixXd rest(d.dim(), d.num_atoms() - r_g);
      Eigen::Index cursor = 0;
      for (int k = 0; k < d.num_atoms(); ++k) {
        if (!taken[static_cast<std::size_t>(k)]) rest.col(cursor++) = d.atoms().col(k);
      }
      row.local_err =
          dist_12(Dictionary(std::move(rest), d.unit_norm()), local_truth).value;
    } else {
      row.local_err = 0.0;
    }
    return row;
  };

  for (int i = 0; i < n; ++i) history.push_back(evaluate(0, i, 0.0));

  for (int t = 1; t <= rounds; ++t) {
    parallel_for_clients(clients, threads, [&](int i) {
      ClientState& c = clients[static_cast<std::size_t>(i)];
      current[static_cast<std::size_t>(i)] =
          dl_step(c.data, current[static_cast<std::size_t>(i)], c.algorithm)
              .dictionary;
    });
    for (int i = 0; i < n; ++i) {
      history.push_back(evaluate(t, i, 0.0));
    }
  }
  return history;
}

SplitReconstruction reconstruct_split(const Eigen::MatrixXd& y,
                                      const PartitionedDictionary& part,
                                      double zeta, int k) {
  const int r = part.num_atoms();
  if (k < 0 || k > r) {
    throw std::invalid_argument("reconstruct_split: need 0 <= k <= total atoms");
  }
  Eigen::MatrixXd x =
      hard_threshold(part.concatenated().atoms().transpose() * y, zeta);
  // Keep the k largest-magnitude coefficients per sample; ties keep the
  // smaller row index.
  for (Eigen::Index col = 0; col < x.cols(); ++col) {
    std::vector<int> order(static_cast<std::size_t>(r));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
      return std::abs(x(a, col)) > std::abs(x(b, col));
    });
    for (int i = k; i < r; ++i) x(order[static_cast<std::size_t>(i)], col) = 0.0;
  }
  SplitReconstruction out;
  out.global_part = part.global_part.atoms() * x.topRows(part.num_global());
  out.local_part = part.local_part.atoms() * x.bottomRows(part.num_local());
  return out;
}

}  // namespace perdl
