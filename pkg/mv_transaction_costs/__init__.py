# Copyright (c) 2026 The mv_transaction_costs authors
# The mv_transaction_costs package is released under the terms of the AGPLv3 or higher.

from .mv_transaction_costs import MeanVarianceTransactionCosts
