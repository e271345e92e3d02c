#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "fedtrust/digest.hpp"
#include "fedtrust/opinion.hpp"
#include "fedtrust/serial.hpp"

namespace fedtrust {

// In-process consortium blockchain for reputation opinions. Opinion
// transactions carry an HMAC-SHA256 keyed digest over their canonical
// serialization; blocks hash-chain those transactions; commits run a
// PBFT-style counted vote over simulated miners. One writer serializes
// commits; queries only ever observe committed state.

struct unknown_publisher : std::runtime_error {
  explicit unknown_publisher(const std::string& id)
      : std::runtime_error("unknown publisher: " + id) {}
};

struct invalid_tx : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct chain_format_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct TxContent {
  std::string publisher_id;
  std::string worker_id;
  Opinion opinion;
  double alpha_eff = 0.0;
  double beta_eff = 0.0;
  uint64_t task_index = 0;

  std::vector<uint8_t> canonical_bytes() const {
    ByteWriter w;
    w.str(publisher_id);
    w.str(worker_id);
    w.f64(opinion.belief);
    w.f64(opinion.distrust);
    w.f64(opinion.uncertainty);
    w.f64(alpha_eff);
    w.f64(beta_eff);
    w.u64(task_index);
    return w.take();
  }
};

struct OpinionTx {
  TxContent content;
  Digest signature{};

  void serialize(ByteWriter& w) const {
    w.str(content.publisher_id);
    w.str(content.worker_id);
    w.f64(content.opinion.belief);
    w.f64(content.opinion.distrust);
    w.f64(content.opinion.uncertainty);
    w.f64(content.alpha_eff);
    w.f64(content.beta_eff);
    w.u64(content.task_index);
    w.fixed(signature);
  }

  static OpinionTx deserialize(ByteReader& r) {
    OpinionTx tx;
    tx.content.publisher_id = r.str();
    tx.content.worker_id = r.str();
    tx.content.opinion.belief = r.f64();
    tx.content.opinion.distrust = r.f64();
    tx.content.opinion.uncertainty = r.f64();
    tx.content.alpha_eff = r.f64();
    tx.content.beta_eff = r.f64();
    tx.content.task_index = r.u64();
    tx.signature = r.fixed<32>();
    return tx;
  }
};

struct Block {
  uint64_t height = 0;
  Digest prev_hash{};
  std::vector<OpinionTx> tx_list;
  std::string proposer;
  Digest block_hash{};

  // Everything the hash covers, in fixed field order.
  std::vector<uint8_t> canonical_bytes() const {
    ByteWriter w;
    w.u64(height);
    w.fixed(prev_hash);
    w.str(proposer);
    w.u32(static_cast<uint32_t>(tx_list.size()));
    for (const auto& tx : tx_list) tx.serialize(w);
    return w.take();
  }

  Digest compute_hash() const { return sha256(canonical_bytes()); }

  std::vector<uint8_t> serialize() const {
    auto bytes = canonical_bytes();
    bytes.insert(bytes.end(), block_hash.begin(), block_hash.end());
    return bytes;
  }

  static Block deserialize(const std::vector<uint8_t>& bytes) {
    ByteReader r(bytes);
    Block b;
    b.height = r.u64();
    b.prev_hash = r.fixed<32>();
    b.proposer = r.str();
    uint32_t n = r.u32();
    b.tx_list.reserve(n);
    for (uint32_t i = 0; i < n; ++i) b.tx_list.push_back(OpinionTx::deserialize(r));
    b.block_hash = r.fixed<32>();
    if (!r.done()) throw chain_format_error("trailing bytes after block record");
    return b;
  }
};

struct Miner {
  std::string id;
  bool faulty = false;
};

struct MinerSet {
  std::vector<Miner> miners;

  static MinerSet make(size_t count, size_t faulty_count = 0) {
    MinerSet set;
    for (size_t i = 0; i < count; ++i) {
      char buf[16];
      std::snprintf(buf, sizeof(buf), "m%02u", static_cast<unsigned>(i));
      set.miners.push_back(Miner{buf, i < faulty_count});
    }
    return set;
  }

  size_t size() const { return miners.size(); }
  // Tolerated faults: f = floor((n-1)/3), so n >= 3f+1 holds by construction.
  size_t fault_tolerance() const { return miners.empty() ? 0 : (miners.size() - 1) / 3; }
  size_t quorum() const { return 2 * fault_tolerance() + 1; }

  size_t honest_count() const {
    size_t n = 0;
    for (const auto& m : miners)
      if (!m.faulty) ++n;
    return n;
  }

  bool contains(const std::string& id) const {
    for (const auto& m : miners)
      if (m.id == id) return true;
    return false;
  }
};

class ReputationLedger {
 public:
  ReputationLedger() { chain_.push_back(make_genesis()); }

  // Keys are derived from the publisher id with a fixed tag, so exported
  // chains verify standalone. Registration is the membership gate for
  // signing; real PKI is out of scope for this simulation.
  static Digest derive_key(const std::string& publisher_id) {
    return sha256(std::string("fedtrust/publisher-key/v1:") + publisher_id);
  }

  void register_publisher(const std::string& id) { publishers_.insert(id); }

  bool is_registered(const std::string& id) const { return publishers_.count(id) > 0; }

  OpinionTx sign_tx(const TxContent& content) const {
    if (!is_registered(content.publisher_id)) throw unknown_publisher(content.publisher_id);
    OpinionTx tx;
    tx.content = content;
    const Digest key = derive_key(content.publisher_id);
    const auto bytes = content.canonical_bytes();
    tx.signature = hmac_sha256(key, bytes);
    return tx;
  }

  static bool verify_tx_with_key(const OpinionTx& tx, const Digest& key) {
    const auto bytes = tx.content.canonical_bytes();
    return hmac_sha256(key, bytes) == tx.signature;
  }

  static bool verify_tx(const OpinionTx& tx) {
    return verify_tx_with_key(tx, derive_key(tx.content.publisher_id));
  }

  // PBFT reduced to counted votes: the proposer pre-prepares the candidate
  // block, honest miners validate and vote through prepare and commit, faulty
  // miners abstain. The block is appended iff commit votes reach the 2f+1
  // quorum; on failure the chain is untouched.
  std::optional<Block> pbft_commit(const std::vector<OpinionTx>& pending,
                                   const MinerSet& miners, const std::string& proposer) {
    if (pending.empty()) throw std::invalid_argument("pbft_commit: no pending transactions");
    if (!miners.contains(proposer))
      throw std::invalid_argument("pbft_commit: proposer is not a miner");
    for (const auto& tx : pending) {
      if (!verify_tx(tx))
        throw invalid_tx("transaction signature check failed for publisher " +
                         tx.content.publisher_id);
    }

    Block candidate;
    candidate.height = chain_.back().height + 1;
    candidate.prev_hash = chain_.back().block_hash;
    candidate.tx_list = pending;
    candidate.proposer = proposer;
    candidate.block_hash = candidate.compute_hash();

    size_t commit_votes = 0;
    for (const auto& m : miners.miners) {
      if (m.faulty) continue;  // abstains / votes invalid
      if (validate_candidate(candidate)) ++commit_votes;
    }
    if (commit_votes < miners.quorum()) return std::nullopt;

    chain_.push_back(candidate);
    return candidate;
  }

  bool verify_chain() const { return verify_chain(chain_); }

  // Empty result iff hashes recompute, links and heights are sequential, and
  // every transaction signature verifies against its publisher's key;
  // otherwise a diagnostic naming the first bad block.
  static std::optional<std::string> find_chain_defect(const std::vector<Block>& chain) {
    if (chain.empty()) return "chain is empty (missing genesis block)";
    if (chain.front().height != 0) return "block 0: genesis height is not 0";
    if (chain.front().prev_hash != Digest{}) return "block 0: genesis prev_hash is not zero";
    for (size_t i = 0; i < chain.size(); ++i) {
      const Block& b = chain[i];
      const std::string at = "block " + std::to_string(i) + ": ";
      if (b.height != i) return at + "height " + std::to_string(b.height) + " out of sequence";
      if (i > 0 && b.prev_hash != chain[i - 1].block_hash)
        return at + "prev_hash does not match block " + std::to_string(i - 1);
      if (b.compute_hash() != b.block_hash) return at + "stored hash does not recompute";
      for (size_t t = 0; t < b.tx_list.size(); ++t) {
        if (!verify_tx(b.tx_list[t]))
          return at + "tx " + std::to_string(t) + " signature invalid (publisher " +
                 b.tx_list[t].content.publisher_id + ")";
      }
    }
    return std::nullopt;
  }

  static bool verify_chain(const std::vector<Block>& chain) {
    return !find_chain_defect(chain).has_value();
  }

  // Latest committed opinion about a worker per publisher: highest
  // task_index, ties broken by block height then intra-block order.
  std::map<std::string, std::pair<Opinion, uint64_t>> latest_opinions(
      const std::string& worker_id) const {
    std::map<std::string, std::pair<Opinion, uint64_t>> out;
    for (const auto& block : chain_) {
      for (const auto& tx : block.tx_list) {
        if (tx.content.worker_id != worker_id) continue;
        auto it = out.find(tx.content.publisher_id);
        if (it == out.end() || tx.content.task_index >= it->second.second) {
          out[tx.content.publisher_id] = {tx.content.opinion, tx.content.task_index};
        }
      }
    }
    return out;
  }

  // Committed-transaction counts per worker for one publisher inside the
  // frequency window; the on-chain proxy for interaction frequency.
  std::map<std::string, size_t> interaction_counts(const std::string& publisher_id,
                                                   uint64_t now, uint64_t window) const {
    std::map<std::string, size_t> out;
    for (const auto& block : chain_) {
      for (const auto& tx : block.tx_list) {
        if (tx.content.publisher_id != publisher_id) continue;
        if (tx.content.task_index > now) continue;
        if (now - tx.content.task_index >= window) continue;
        out[tx.content.worker_id] += 1;
      }
    }
    return out;
  }

  const std::vector<Block>& chain() const { return chain_; }
  size_t height() const { return chain_.back().height; }

  // Export as a line-delimited record file: one block per line, canonical
  // serialization hex-encoded.
  std::string export_lines() const {
    std::ostringstream out;
    for (const auto& b : chain_) out << to_hex(b.serialize()) << '\n';
    return out.str();
  }

  void export_file(const std::string& path) const {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open chain file for writing: " + path);
    f << export_lines();
    if (!f) throw std::runtime_error("failed writing chain file: " + path);
  }

  static std::vector<Block> parse_lines(std::istream& in) {
    std::vector<Block> chain;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      try {
        chain.push_back(Block::deserialize(from_hex(line)));
      } catch (const std::exception& e) {
        throw chain_format_error("line " + std::to_string(line_no) + ": " + e.what());
      }
    }
    return chain;
  }

  static std::vector<Block> parse_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::ios_base::failure("cannot open chain file: " + path);
    return parse_lines(f);
  }

  // Adopt an externally parsed chain (e.g. a test fixture). The chain must
  // verify; rejecting here keeps the committed-state-only query guarantee.
  static ReputationLedger import_chain(std::vector<Block> chain) {
    if (!verify_chain(chain)) throw invalid_tx("imported chain failed verification");
    ReputationLedger ledger;
    ledger.chain_ = std::move(chain);
    for (const auto& b : ledger.chain_)
      for (const auto& tx : b.tx_list) ledger.publishers_.insert(tx.content.publisher_id);
    return ledger;
  }

 private:
  static Block make_genesis() {
    Block g;
    g.height = 0;
    g.prev_hash = Digest{};
    g.proposer = "genesis";
    g.block_hash = g.compute_hash();
    return g;
  }

  static bool validate_candidate(const Block& candidate) {
    if (candidate.compute_hash() != candidate.block_hash) return false;
    for (const auto& tx : candidate.tx_list) {
      if (!verify_tx(tx)) return false;
    }
    return true;
  }

  std::vector<Block> chain_;
  std::set<std::string> publishers_;
};

}  // namespace fedtrust
