#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <map>
#include <sstream>
#include <vector>

#include "fedtrust/digest.hpp"
#include "fedtrust/ledger.hpp"
#include "fedtrust/rng.hpp"

using namespace fedtrust;

namespace {

TxContent make_content(const std::string& pub, const std::string& worker, uint64_t task,
                       double belief = 0.6) {
  TxContent c;
  c.publisher_id = pub;
  c.worker_id = worker;
  c.opinion = Opinion{belief, (1.0 - belief) / 2.0, (1.0 - belief) / 2.0};
  c.alpha_eff = 3.0;
  c.beta_eff = 1.0;
  c.task_index = task;
  return c;
}

// Builds a committed chain with `n_blocks` blocks of random txs.
ReputationLedger random_ledger(Rng& rng, size_t n_blocks, size_t publishers = 3,
                               size_t workers = 4) {
  ReputationLedger ledger;
  for (size_t p = 0; p < publishers; ++p) ledger.register_publisher("p" + std::to_string(p));
  MinerSet miners = MinerSet::make(4);
  for (size_t b = 0; b < n_blocks; ++b) {
    std::vector<OpinionTx> txs;
    size_t n_tx = 1 + rng.bounded(3);
    for (size_t t = 0; t < n_tx; ++t) {
      auto content = make_content("p" + std::to_string(rng.bounded(publishers)),
                                  "w" + std::to_string(rng.bounded(workers)), rng.bounded(30),
                                  rng.uniform(0.0, 1.0));
      txs.push_back(ledger.sign_tx(content));
    }
    REQUIRE(ledger.pbft_commit(txs, miners, miners.miners[0].id).has_value());
  }
  return ledger;
}

}  // namespace

TEST_CASE("sha256 known vectors") {
  CHECK(to_hex(sha256(std::string_view{""})) ==
        "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(to_hex(sha256(std::string_view{"abc"})) ==
        "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK(to_hex(sha256(std::string_view{
            "abcdbcdecdefdefgefghfghighijhijkijkljklmklmnlmnomnopnopq"})) ==
        "248d6a61d20638b8e5c026930c3e6039a33ce45964ff2167f6ecedd419db06c1");
}

TEST_CASE("hmac-sha256 known vector") {
  // RFC 4231 test case 2
  std::string key = "Jefe";
  std::string msg = "what do ya want for nothing?";
  auto mac = hmac_sha256(
      std::span<const uint8_t>(reinterpret_cast<const uint8_t*>(key.data()), key.size()),
      std::span<const uint8_t>(reinterpret_cast<const uint8_t*>(msg.data()), msg.size()));
  CHECK(to_hex(mac) == "5bdcc146bf60754e6a042426089575c75a003f089d2739839dec58b964ec3843");
}

TEST_CASE("hex round trip") {
  std::vector<uint8_t> bytes = {0x00, 0xff, 0x12, 0xab};
  CHECK(to_hex(bytes) == "00ff12ab");
  CHECK(from_hex("00ff12ab") == bytes);
  CHECK_THROWS(from_hex("0g"));
  CHECK_THROWS(from_hex("abc"));
}

TEST_CASE("sign then verify round trip") {
  ReputationLedger ledger;
  ledger.register_publisher("alice");
  auto tx = ledger.sign_tx(make_content("alice", "w1", 4));
  CHECK(ReputationLedger::verify_tx(tx));
}

TEST_CASE("any field mutation breaks the signature") {
  ReputationLedger ledger;
  ledger.register_publisher("alice");
  auto tx = ledger.sign_tx(make_content("alice", "w1", 4));

  auto tampered = tx;
  tampered.content.worker_id = "w2";
  CHECK_FALSE(ReputationLedger::verify_tx(tampered));

  tampered = tx;
  tampered.content.opinion.belief += 1e-9;
  CHECK_FALSE(ReputationLedger::verify_tx(tampered));

  tampered = tx;
  tampered.content.task_index += 1;
  CHECK_FALSE(ReputationLedger::verify_tx(tampered));
}

TEST_CASE("verification against the wrong key fails") {
  ReputationLedger ledger;
  ledger.register_publisher("alice");
  auto tx = ledger.sign_tx(make_content("alice", "w1", 4));
  CHECK(ReputationLedger::verify_tx_with_key(tx, ReputationLedger::derive_key("alice")));
  CHECK_FALSE(ReputationLedger::verify_tx_with_key(tx, ReputationLedger::derive_key("bob")));
}

TEST_CASE("signing for an unregistered publisher is rejected") {
  ReputationLedger ledger;
  CHECK_THROWS_AS(ledger.sign_tx(make_content("ghost", "w1", 0)), unknown_publisher);
}

TEST_CASE("quorum arithmetic") {
  CHECK(MinerSet::make(4).fault_tolerance() == 1);
  CHECK(MinerSet::make(4).quorum() == 3);
  CHECK(MinerSet::make(7).fault_tolerance() == 2);
  CHECK(MinerSet::make(7).quorum() == 5);
}

TEST_CASE("commit succeeds exactly when honest miners reach quorum") {
  for (size_t n : {size_t{4}, size_t{7}}) {
    for (size_t faulty = 0; faulty <= n; ++faulty) {
      ReputationLedger ledger;
      ledger.register_publisher("p0");
      MinerSet miners = MinerSet::make(n, faulty);
      auto tx = ledger.sign_tx(make_content("p0", "w0", 1));
      auto block = ledger.pbft_commit({tx}, miners, miners.miners[n - 1].id);
      const bool expect_commit = (n - faulty) >= miners.quorum();
      CHECK(block.has_value() == expect_commit);
      CHECK(ledger.height() == (expect_commit ? 1 : 0));
      CHECK(ledger.verify_chain());
    }
  }
}

TEST_CASE("failed commit leaves the chain untouched") {
  ReputationLedger ledger;
  ledger.register_publisher("p0");
  MinerSet good = MinerSet::make(4, 0);
  auto tx = ledger.sign_tx(make_content("p0", "w0", 1));
  REQUIRE(ledger.pbft_commit({tx}, good, "m00").has_value());
  auto before = ledger.chain();

  MinerSet bad = MinerSet::make(4, 2);
  auto tx2 = ledger.sign_tx(make_content("p0", "w0", 2));
  CHECK_FALSE(ledger.pbft_commit({tx2}, bad, "m00").has_value());
  CHECK(ledger.chain().size() == before.size());
  CHECK(ledger.chain().back().block_hash == before.back().block_hash);
}

TEST_CASE("commit preconditions") {
  ReputationLedger ledger;
  ledger.register_publisher("p0");
  MinerSet miners = MinerSet::make(4);
  CHECK_THROWS_AS(ledger.pbft_commit({}, miners, "m00"), std::invalid_argument);

  auto tx = ledger.sign_tx(make_content("p0", "w0", 1));
  CHECK_THROWS_AS(ledger.pbft_commit({tx}, miners, "nobody"), std::invalid_argument);

  auto forged = tx;
  forged.content.opinion.belief = 0.9;
  CHECK_THROWS_AS(ledger.pbft_commit({forged}, miners, "m00"), invalid_tx);
}

TEST_CASE("genesis-only chain verifies") {
  ReputationLedger ledger;
  CHECK(ledger.verify_chain());
  CHECK(ledger.height() == 0);
}

TEST_CASE("tampering with committed state is detected") {
  Rng rng(5);
  ReputationLedger ledger = random_ledger(rng, 3);
  auto chain = ledger.chain();

  SUBCASE("mutated tx field") {
    chain[1].tx_list[0].content.opinion.belief += 0.25;
    CHECK_FALSE(ReputationLedger::verify_chain(chain));
  }
  SUBCASE("reordered blocks") {
    std::swap(chain[1], chain[2]);
    CHECK_FALSE(ReputationLedger::verify_chain(chain));
  }
  SUBCASE("dropped block") {
    chain.erase(chain.begin() + 1);
    CHECK_FALSE(ReputationLedger::verify_chain(chain));
  }
}

TEST_CASE("single-bit mutations of the serialized chain are always detected") {
  Rng rng(17);
  ReputationLedger ledger = random_ledger(rng, 4);
  const auto& chain = ledger.chain();

  size_t detected = 0;
  const int trials = 300;
  for (int i = 0; i < trials; ++i) {
    size_t block_idx = rng.bounded(chain.size());
    auto bytes = chain[block_idx].serialize();
    size_t bit = rng.bounded(bytes.size() * 8);
    bytes[bit / 8] ^= static_cast<uint8_t>(1u << (bit % 8));

    auto mutated = chain;
    bool bad = false;
    try {
      mutated[block_idx] = Block::deserialize(bytes);
      bad = !ReputationLedger::verify_chain(mutated);
    } catch (const std::exception&) {
      bad = true;  // structural corruption surfaces as a parse error
    }
    if (bad) ++detected;
  }
  CHECK(detected == trials);
}

TEST_CASE("append-only: committed prefixes never change") {
  Rng rng(23);
  ReputationLedger ledger;
  ledger.register_publisher("p0");
  MinerSet miners = MinerSet::make(4);
  std::vector<std::vector<Block>> snapshots;
  for (int b = 0; b < 5; ++b) {
    snapshots.push_back(ledger.chain());
    auto tx = ledger.sign_tx(make_content("p0", "w" + std::to_string(b), b, rng.uniform()));
    REQUIRE(ledger.pbft_commit({tx}, miners, "m01").has_value());
  }
  const auto& final_chain = ledger.chain();
  for (const auto& snap : snapshots) {
    for (size_t i = 0; i < snap.size(); ++i) {
      CHECK(final_chain[i].block_hash == snap[i].block_hash);
      CHECK(final_chain[i].height == snap[i].height);
    }
  }
}

TEST_CASE("latest opinions: empty, latest-wins, multi-publisher") {
  ReputationLedger ledger;
  ledger.register_publisher("p0");
  ledger.register_publisher("p1");
  ledger.register_publisher("p2");
  MinerSet miners = MinerSet::make(4);

  CHECK(ledger.latest_opinions("w0").empty());

  auto t1 = ledger.sign_tx(make_content("p0", "w0", 3, 0.3));
  auto t2 = ledger.sign_tx(make_content("p1", "w0", 3, 0.4));
  REQUIRE(ledger.pbft_commit({t1, t2}, miners, "m00").has_value());
  auto t3 = ledger.sign_tx(make_content("p0", "w0", 7, 0.8));
  auto t4 = ledger.sign_tx(make_content("p2", "w0", 5, 0.6));
  REQUIRE(ledger.pbft_commit({t3, t4}, miners, "m00").has_value());

  auto latest = ledger.latest_opinions("w0");
  REQUIRE(latest.size() == 3);
  CHECK(latest["p0"].second == 7);
  CHECK(latest["p0"].first.belief == doctest::Approx(0.8));
  CHECK(latest["p1"].second == 3);
  CHECK(latest["p2"].second == 5);
  CHECK(ledger.latest_opinions("w9").empty());
}

TEST_CASE("latest opinions equal a brute-force scan on random chains") {
  Rng rng(31);
  for (int trial = 0; trial < 30; ++trial) {
    ReputationLedger ledger = random_ledger(rng, 1 + rng.bounded(6));
    for (size_t w = 0; w < 4; ++w) {
      std::string worker = "w" + std::to_string(w);
      // oracle: linear scan keeping the max-task_index tx, later scan order wins ties
      std::map<std::string, std::pair<Opinion, uint64_t>> expect;
      for (const auto& block : ledger.chain()) {
        for (const auto& tx : block.tx_list) {
          if (tx.content.worker_id != worker) continue;
          auto it = expect.find(tx.content.publisher_id);
          if (it == expect.end() || tx.content.task_index >= it->second.second)
            expect[tx.content.publisher_id] = {tx.content.opinion, tx.content.task_index};
        }
      }
      auto got = ledger.latest_opinions(worker);
      REQUIRE(got.size() == expect.size());
      for (const auto& [pub, val] : expect) {
        REQUIRE(got.count(pub) == 1);
        CHECK(got[pub].second == val.second);
        CHECK(got[pub].first.belief == val.first.belief);
      }
    }
  }
}

TEST_CASE("interaction counts respect the frequency window") {
  ReputationLedger ledger;
  ledger.register_publisher("p0");
  MinerSet miners = MinerSet::make(4);
  std::vector<OpinionTx> txs;
  txs.push_back(ledger.sign_tx(make_content("p0", "w0", 2)));
  txs.push_back(ledger.sign_tx(make_content("p0", "w0", 9)));
  txs.push_back(ledger.sign_tx(make_content("p0", "w1", 9)));
  txs.push_back(ledger.sign_tx(make_content("p0", "w1", 12)));
  REQUIRE(ledger.pbft_commit(txs, miners, "m00").has_value());

  auto counts = ledger.interaction_counts("p0", 10, 5);
  CHECK(counts["w0"] == 1);   // task 2 out of window, task 9 in
  CHECK(counts["w1"] == 1);   // task 12 is in the future relative to now=10
  auto all = ledger.interaction_counts("p0", 12, 100);
  CHECK(all["w0"] == 2);
  CHECK(all["w1"] == 2);
}

TEST_CASE("chain export and import round trip") {
  Rng rng(47);
  ReputationLedger ledger = random_ledger(rng, 3);
  std::string lines = ledger.export_lines();

  std::istringstream in(lines);
  auto chain = ReputationLedger::parse_lines(in);
  REQUIRE(chain.size() == ledger.chain().size());
  CHECK(ReputationLedger::verify_chain(chain));
  auto reimported = ReputationLedger::import_chain(chain);
  CHECK(reimported.export_lines() == lines);
}

TEST_CASE("corrupted export fails verification or parsing") {
  Rng rng(53);
  ReputationLedger ledger = random_ledger(rng, 2);
  std::string lines = ledger.export_lines();
  // flip one hex nibble somewhere past the first line's height field
  size_t pos = lines.size() / 2;
  while (lines[pos] == '\n') ++pos;
  lines[pos] = lines[pos] == 'a' ? 'b' : 'a';

  std::istringstream in(lines);
  bool detected = false;
  try {
    detected = !ReputationLedger::verify_chain(ReputationLedger::parse_lines(in));
  } catch (const std::exception&) {
    detected = true;
  }
  CHECK(detected);
}
