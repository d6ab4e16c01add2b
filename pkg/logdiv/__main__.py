from logdiv.main import main

raise SystemExit(main())
