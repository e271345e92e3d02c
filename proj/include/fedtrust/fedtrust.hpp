#pragma once

// Umbrella header for the reputation-based federated learning simulator.

#include "fedtrust/dataset.hpp"
#include "fedtrust/defense.hpp"
#include "fedtrust/digest.hpp"
#include "fedtrust/experiment.hpp"
#include "fedtrust/ledger.hpp"
#include "fedtrust/log.hpp"
#include "fedtrust/matrix.hpp"
#include "fedtrust/model.hpp"
#include "fedtrust/opinion.hpp"
#include "fedtrust/orchestrator.hpp"
#include "fedtrust/rng.hpp"
#include "fedtrust/scenario.hpp"
#include "fedtrust/serial.hpp"
#include "fedtrust/worker.hpp"
