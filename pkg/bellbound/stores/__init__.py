from bellbound.stores.duckdb import DuckDBStore, StoreFactory

__all__ = ["DuckDBStore", "StoreFactory"]
